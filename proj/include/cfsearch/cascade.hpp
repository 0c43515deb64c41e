#pragma once

// OPA-style cascade simulation: a random branch outage followed by the
// protection-relay loop, islanding, load shedding and re-dispatch, plus the
// depth-limited exploration of the random-outage tree.

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cfsearch/dcflow.hpp"
#include "cfsearch/dispatch.hpp"
#include "cfsearch/grid.hpp"

namespace cfsearch {

// Below this a step is not considered to have shed load.
inline constexpr double kShedToleranceMw = 1e-6;

enum class EventKind { RandomOutage, RelayTrip, IslandShed, Redispatch };
enum class RelayMode { Simultaneous, SequentialWorstFirst };

inline const char* to_string(EventKind k) {
  switch (k) {
    case EventKind::RandomOutage: return "RANDOM_OUTAGE";
    case EventKind::RelayTrip: return "RELAY_TRIP";
    case EventKind::IslandShed: return "ISLAND_SHED";
    case EventKind::Redispatch: return "REDISPATCH";
  }
  return "?";
}

inline EventKind event_kind_from_string(const std::string& s) {
  if (s == "RANDOM_OUTAGE") return EventKind::RandomOutage;
  if (s == "RELAY_TRIP") return EventKind::RelayTrip;
  if (s == "ISLAND_SHED") return EventKind::IslandShed;
  if (s == "REDISPATCH") return EventKind::Redispatch;
  throw ParseError("unknown event kind \"" + s + "\"");
}

struct CascadeEvent {
  EventKind kind = EventKind::RandomOutage;
  std::optional<int> branch;
  double shed_mw = 0.0;
  double loading_ratio = 0.0;  // RELAY_TRIP only: |flow|/limit at trip time

  bool operator==(const CascadeEvent&) const = default;
};

struct CascadeOptions {
  double beta = kDefaultRelayThreshold;
  RelayMode relay_mode = RelayMode::Simultaneous;
};

struct Propagation {
  OperatingState state;
  std::vector<CascadeEvent> events;
  double shed = 0.0;  // MW shed by this propagation alone
};

namespace detail {

// Adjusts generation (and, when capacity runs out, provisionally scales
// loads) so that every island balances. Used only to evaluate flows inside
// the relay loop; the actual shedding decision is taken by re-dispatch.
inline OperatingState provisionally_balanced(const Network& net, const OperatingState& s, const Islands& islands) {
  OperatingState out = s;
  std::vector<std::vector<int>> gens(islands.count());
  for (const auto& g : net.generators) gens[islands.of_bus[g.bus]].push_back(g.id);
  for (int isl = 0; isl < islands.count(); ++isl) {
    double load = 0.0, gen = 0.0;
    for (int b : islands.members[isl]) load += out.load[b];
    for (int g : gens[isl]) gen += out.gen_output[g];
    const double delta = load - gen;
    if (std::abs(delta) <= 1e-9) continue;
    if (gens[isl].empty()) {
      for (int b : islands.members[isl]) out.load[b] = 0.0;
      continue;
    }
    if (delta > 0.0) {
      double room = 0.0;
      for (int g : gens[isl]) room += net.generators[g].capacity_max - out.gen_output[g];
      if (room >= delta && room > 0.0) {
        for (int g : gens[isl])
          out.gen_output[g] += delta * (net.generators[g].capacity_max - out.gen_output[g]) / room;
      } else {
        double cap = 0.0;
        for (int g : gens[isl]) {
          out.gen_output[g] = net.generators[g].capacity_max;
          cap += out.gen_output[g];
        }
        const double scale = cap / load;
        for (int b : islands.members[isl]) out.load[b] *= scale;
      }
    } else {
      const double excess = -delta;
      double room = 0.0;
      for (int g : gens[isl]) room += out.gen_output[g] - net.generators[g].capacity_min;
      if (room >= excess && room > 0.0) {
        for (int g : gens[isl])
          out.gen_output[g] -= excess * (out.gen_output[g] - net.generators[g].capacity_min) / room;
      } else {
        const double scale = gen > 0.0 ? load / gen : 0.0;
        for (int g : gens[isl]) out.gen_output[g] *= scale;
      }
    }
  }
  return out;
}

}  // namespace detail

// Disconnects `branch`, runs the relay loop to a fixpoint and re-dispatches.
inline Propagation propagate(const Network& net, const OperatingState& state, int branch,
                             const CascadeOptions& opt = {}) {
  if (branch < 0 || branch >= net.branch_count() || !state.in_service[branch])
    throw ValidationError("propagate: branch " + std::to_string(branch) + " is not in service");
  Propagation out;
  out.state = state;
  auto& s = out.state;
  s.in_service[branch] = false;
  s.flow[branch] = 0.0;
  out.events.push_back({EventKind::RandomOutage, branch, 0.0, 0.0});

  for (;;) {
    const auto islands = find_islands(net, s.in_service);
    std::vector<double> capacity(islands.count(), 0.0);
    for (const auto& g : net.generators) capacity[islands.of_bus[g.bus]] += g.capacity_max;
    for (int isl = 0; isl < islands.count(); ++isl) {
      if (capacity[isl] > 0.0) continue;
      double lost = 0.0;
      for (int b : islands.members[isl]) {
        lost += s.load[b];
        s.load[b] = 0.0;
      }
      if (lost > 0.0) {
        out.events.push_back({EventKind::IslandShed, std::nullopt, lost, 0.0});
        out.shed += lost;
      }
    }

    const auto flows = solve_dcpf(net, detail::provisionally_balanced(net, s, islands)).flow;
    std::vector<std::pair<double, int>> overloaded;
    for (const auto& br : net.branches) {
      if (!s.in_service[br.id]) continue;
      const double ratio = std::abs(flows[br.id]) / br.flow_limit_long_term;
      if (ratio > opt.beta) overloaded.push_back({ratio, br.id});
    }
    if (overloaded.empty()) break;
    if (opt.relay_mode == RelayMode::SequentialWorstFirst) {
      auto worst = overloaded.front();
      for (const auto& o : overloaded)
        if (o.first > worst.first) worst = o;
      overloaded = {worst};
    }
    for (const auto& [ratio, id] : overloaded) {
      s.in_service[id] = false;
      out.events.push_back({EventKind::RelayTrip, id, 0.0, ratio});
    }
  }

  const auto d = redispatch_min_shed(net, s.in_service, s.load);
  const double shed = d.total_shed();
  out.events.push_back({EventKind::Redispatch, std::nullopt, shed, 0.0});
  out.shed += shed;
  s = state_from_dispatch(s.in_service, s.load, d, state.shed_so_far + out.shed - shed);
  return out;
}

// Step 1: minimum-cost dispatch of the intact network, falling back to the
// minimum-shed dispatch when the loads cannot be served without shedding.
inline OperatingState initial_state(const Network& net, const std::vector<double>& loads) {
  std::vector<bool> all(net.branch_count(), true);
  try {
    return state_from_dispatch(all, loads, dcopf_initial(net, loads));
  } catch (const InfeasibleWithoutShedding&) {
    return state_from_dispatch(all, loads, redispatch_min_shed(net, all, loads));
  }
}

struct CascadePath {
  std::vector<int> random_outages;
  std::vector<CascadeEvent> events;
  double total_shed = 0.0;  // sum of shed over all events on the path
  double step_shed = 0.0;   // shed caused by the last random outage
  OperatingState final_state;

  // A path incurs load shedding when its last random outage sheds load.
  bool sheds() const { return step_shed > kShedToleranceMw; }
};

// Branch ranking at a search node. `tiers` holds ascending prefix lengths of
// `order`. Sweep s expands interior nodes fully but tries only the first
// tiers[s] entries at nodes whose children are leaves; sweeps continue until
// one runs with no tier limit left. A sequence is never simulated twice.
struct RankedBranches {
  std::vector<int> order;
  std::vector<std::size_t> tiers;

  std::size_t limit(std::size_t sweep) const { return sweep < tiers.size() ? std::min(tiers[sweep], order.size()) : order.size(); }
};

struct SearchNode {
  std::vector<int> outages;
  OperatingState state;
};

using OrderFn = std::function<RankedBranches(const SearchNode&)>;

struct OpaOptions {
  int max_random_outages = 2;  // R
  CascadeOptions cascade;
  std::size_t budget = std::numeric_limits<std::size_t>::max();
  // Called after every attempt with the simulated path and the attempt count.
  std::function<void(const CascadePath&, std::size_t)> on_attempt;
};

struct OpaResult {
  std::vector<CascadePath> paths;  // every leaf or shedding node, in discovery order
  std::size_t attempts = 0;
  bool budget_exhausted = false;
};

namespace detail {

class OutageTreeSearch {
 public:
  OutageTreeSearch(const Network& net, OrderFn order, const OpaOptions& opt)
      : net_(net), order_(std::move(order)), opt_(opt) {}

  OpaResult run(const OperatingState& root_state) {
    if (opt_.max_random_outages < 1) return {};
    Node& root = nodes_[{}];
    root.node.state = root_state;
    for (std::size_t sweep = 0; !stop_; ++sweep) {
      limited_ = false;
      visit(root, sweep);
      if (!limited_) break;
    }
    result_.budget_exhausted = stop_;
    return std::move(result_);
  }

 private:
  struct Node {
    SearchNode node;
    double path_shed = 0.0;
    std::optional<RankedBranches> ranking;
  };

  void visit(Node& parent, std::size_t sweep) {
    const int depth = static_cast<int>(parent.node.outages.size());
    if (depth >= opt_.max_random_outages || stop_) return;
    if (!parent.ranking) parent.ranking = order_(parent.node);
    const RankedBranches ranking = *parent.ranking;
    std::size_t limit = ranking.order.size();
    if (depth + 1 == opt_.max_random_outages) {
      limit = ranking.limit(sweep);
      if (sweep < ranking.tiers.size()) limited_ = true;
    }
    for (std::size_t idx = 0; idx < limit; ++idx) {
      std::vector<int> key = parent.node.outages;
      key.push_back(ranking.order[idx]);
      auto it = nodes_.find(key);
      if (it == nodes_.end()) {
        if (result_.attempts >= opt_.budget) {
          stop_ = true;
          return;
        }
        it = nodes_.emplace(key, attempt(parent, ranking.order[idx], key)).first;
      }
      visit(it->second, sweep);
      if (stop_) return;
    }
  }

  Node attempt(const Node& parent, int branch, const std::vector<int>& key) {
    auto prop = propagate(net_, parent.node.state, branch, opt_.cascade);
    ++result_.attempts;
    Node child;
    child.node.outages = key;
    child.path_shed = parent.path_shed + prop.shed;

    CascadePath path;
    path.random_outages = key;
    path.events = parent_events(parent);
    path.events.insert(path.events.end(), prop.events.begin(), prop.events.end());
    path.total_shed = child.path_shed;
    path.step_shed = prop.shed;
    path.final_state = prop.state;
    child.node.state = std::move(prop.state);
    events_[key] = path.events;

    const bool leaf = static_cast<int>(key.size()) == opt_.max_random_outages;
    if (opt_.on_attempt) opt_.on_attempt(path, result_.attempts);
    if (leaf || path.sheds()) result_.paths.push_back(std::move(path));
    return child;
  }

  std::vector<CascadeEvent> parent_events(const Node& parent) const {
    auto it = events_.find(parent.node.outages);
    return it == events_.end() ? std::vector<CascadeEvent>{} : it->second;
  }

  const Network& net_;
  OrderFn order_;
  const OpaOptions& opt_;
  std::map<std::vector<int>, Node> nodes_;
  std::map<std::vector<int>, std::vector<CascadeEvent>> events_;
  OpaResult result_;
  bool stop_ = false;
  bool limited_ = false;
};

}  // namespace detail

// Explores the random-outage tree to depth R in the order given by `order`.
// Every ordered outage sequence is simulated at most once.
inline OpaResult run_opa(const Network& net, const OperatingState& root, OrderFn order, const OpaOptions& opt) {
  return detail::OutageTreeSearch(net, std::move(order), opt).run(root);
}

inline OpaResult run_opa(const Network& net, const std::vector<double>& initial_loads, OrderFn order,
                         const OpaOptions& opt) {
  return run_opa(net, initial_state(net, initial_loads), std::move(order), opt);
}

// Ranks in-service branches by ascending id.
inline RankedBranches natural_order(const SearchNode& node) {
  RankedBranches r;
  for (std::size_t k = 0; k < node.state.in_service.size(); ++k)
    if (node.state.in_service[k]) r.order.push_back(static_cast<int>(k));
  return r;
}

inline Json path_to_json(const CascadePath& p) {
  Json events = Json::array();
  for (const auto& e : p.events) {
    Json je = {{"kind", to_string(e.kind)}, {"shed_mw", e.shed_mw}};
    je["branch"] = e.branch ? Json(*e.branch) : Json(nullptr);
    events.push_back(std::move(je));
  }
  return {{"outages", p.random_outages}, {"events", std::move(events)}, {"total_shed", p.total_shed}};
}

inline CascadePath path_from_json(const Json& j) {
  CascadePath p;
  p.random_outages = j.at("outages").get<std::vector<int>>();
  p.total_shed = j.at("total_shed").get<double>();
  for (const auto& je : j.at("events")) {
    CascadeEvent e;
    e.kind = event_kind_from_string(je.at("kind").get<std::string>());
    if (!je.at("branch").is_null()) e.branch = je.at("branch").get<int>();
    e.shed_mw = je.at("shed_mw").get<double>();
    p.events.push_back(e);
  }
  // Shedding after the last random outage.
  for (auto it = p.events.rbegin(); it != p.events.rend() && it->kind != EventKind::RandomOutage; ++it)
    p.step_shed += it->shed_mw;
  return p;
}

inline std::string paths_to_jsonl(const std::vector<CascadePath>& paths) {
  std::string out;
  for (const auto& p : paths) out += path_to_json(p).dump() + "\n";
  return out;
}

}  // namespace cfsearch
