#pragma once

// Guided cascade search: branch orderings (random, power flow, LODF
// vulnerability, GCN + LODF), the budgeted online search with its discovery
// curve, and generation of labelled training data.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "cfsearch/cascade.hpp"
#include "cfsearch/dcflow.hpp"
#include "cfsearch/gcn.hpp"
#include "cfsearch/grid.hpp"
#include "cfsearch/synthetic.hpp"
#include "cfsearch/train.hpp"

namespace cfsearch {

enum class StrategyKind { Rand, Pfw, Lodf, Gcn };

inline const char* to_string(StrategyKind k) {
  switch (k) {
    case StrategyKind::Rand: return "RAND";
    case StrategyKind::Pfw: return "PFW";
    case StrategyKind::Lodf: return "LODF";
    case StrategyKind::Gcn: return "GCN";
  }
  return "?";
}

inline StrategyKind strategy_from_string(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  if (s == "RAND") return StrategyKind::Rand;
  if (s == "PFW") return StrategyKind::Pfw;
  if (s == "LODF") return StrategyKind::Lodf;
  if (s == "GCN") return StrategyKind::Gcn;
  throw ValidationError("unknown strategy \"" + s + "\"");
}

// A GCN model bound to the line graph it runs on.
struct GcnGuide {
  gcn::Model model;
  gcn::HopBasis basis;

  GcnGuide(gcn::Model m, const gcn::LineGraph& graph) : model(std::move(m)) {
    if (model.graph_hash != graph.signature)
      throw ValidationError("model graph hash " + gcn::hash_to_hex(model.graph_hash) +
                            " does not match the case (" + gcn::hash_to_hex(graph.signature) + ")");
    basis = gcn::HopBasis(graph, model.hyper.hops);
  }
};

struct SearchStrategy {
  StrategyKind kind = StrategyKind::Lodf;
  std::uint64_t seed = 0;                // RAND
  const GcnGuide* guide = nullptr;       // GCN
};

namespace detail {

// Stable descending sort by score; equal scores keep ascending branch id.
inline std::vector<int> by_descending(const std::vector<int>& ids, const std::vector<double>& score) {
  std::vector<int> out = ids;
  std::stable_sort(out.begin(), out.end(), [&](int a, int b) { return score[a] > score[b]; });
  return out;
}

inline std::uint64_t sequence_salt(const std::vector<int>& outages) {
  Fnv1a h;
  h.add(outages.size());
  for (int k : outages) h.add(static_cast<std::uint64_t>(k));
  return h.value();
}

}  // namespace detail

// Ranks the in-service branches of `state`. `salt` individualizes the RAND
// shuffle per search node.
inline RankedBranches order_branches(const SearchStrategy& strategy, const Network& net, const OperatingState& state,
                                     const LodfTable* table, double beta, std::uint64_t salt = 0) {
  std::vector<int> ids;
  for (int k = 0; k < net.branch_count(); ++k)
    if (state.in_service[k]) ids.push_back(k);
  RankedBranches r;
  auto lodf_scores = [&] {
    if (table) return physical_vulnerability(net, state, *table, beta);
    return physical_vulnerability(net, state, lodf(net, state.in_service), beta);
  };

  switch (strategy.kind) {
    case StrategyKind::Rand: {
      std::mt19937_64 rng(derive_seed(strategy.seed, salt));
      r.order = ids;
      std::shuffle(r.order.begin(), r.order.end(), rng);
      break;
    }
    case StrategyKind::Pfw: {
      std::vector<double> score(net.branch_count(), 0.0);
      for (int k : ids) score[k] = std::abs(state.flow[k]);
      r.order = detail::by_descending(ids, score);
      break;
    }
    case StrategyKind::Lodf:
      r.order = detail::by_descending(ids, lodf_scores());
      break;
    case StrategyKind::Gcn: {
      if (!strategy.guide) throw ValidationError("GCN strategy requires a model");
      const auto pred = gcn::predict(strategy.guide->model, strategy.guide->basis, gcn::extract_features(net, state, beta));
      std::vector<int> positive, rest;
      for (int k : ids) (pred.label[k] ? positive : rest).push_back(k);
      r.order = detail::by_descending(positive, pred.p_shed);
      const auto y = lodf_scores();
      const auto tail = detail::by_descending(rest, y);
      // Tiers: predicted shedding, then predicted relay trips (y^P >= beta), then the rest.
      const auto trips = std::count_if(tail.begin(), tail.end(), [&](int k) { return y[k] >= beta * (1.0 - 1e-12); });
      r.tiers = {r.order.size(), r.order.size() + static_cast<std::size_t>(trips)};
      r.order.insert(r.order.end(), tail.begin(), tail.end());
      return r;
    }
  }
  return r;
}

// Attempts against distinct shedding paths discovered so far, one point per attempt.
struct SearchCurve {
  std::vector<std::pair<std::size_t, std::size_t>> points;
  std::optional<std::size_t> total_paths;  // from an exhaustive reference, when known

  std::size_t found() const { return points.empty() ? 0 : points.back().second; }

  // First attempt count at which `target` paths had been found.
  std::optional<std::size_t> attempts_to_reach(std::size_t target) const {
    if (target == 0) return 0;
    for (const auto& [attempt, found] : points)
      if (found >= target) return attempt;
    return std::nullopt;
  }

  std::string to_csv() const {
    std::ostringstream out;
    out << "attempt,found\n";
    for (const auto& [a, f] : points) out << a << ',' << f << '\n';
    return out.str();
  }
};

struct SearchOutcome {
  OpaResult result;
  SearchCurve curve;

  std::vector<CascadePath> shedding_paths() const {
    std::vector<CascadePath> out;
    for (const auto& p : result.paths)
      if (p.sheds()) out.push_back(p);
    return out;
  }
};

struct SearchOptions {
  int max_random_outages = 2;  // R
  std::size_t budget = std::numeric_limits<std::size_t>::max();
  CascadeOptions cascade;
};

// Online search from an already dispatched root state.
inline SearchOutcome online_search(const Network& net, const OperatingState& root, const SearchStrategy& strategy,
                                   const SearchOptions& opt) {
  if (opt.budget < 1) throw ValidationError("search budget must be >= 1");
  SearchOutcome out;
  std::size_t found = 0;
  OpaOptions opa;
  opa.max_random_outages = opt.max_random_outages;
  opa.cascade = opt.cascade;
  opa.budget = opt.budget;
  opa.on_attempt = [&](const CascadePath& p, std::size_t attempts) {
    if (p.sheds()) ++found;
    out.curve.points.emplace_back(attempts, found);
  };
  const bool needs_lodf = strategy.kind == StrategyKind::Lodf || strategy.kind == StrategyKind::Gcn;
  OrderFn order = [&](const SearchNode& node) {
    std::optional<LodfTable> table;
    if (needs_lodf) table = lodf(net, node.state.in_service);
    return order_branches(strategy, net, node.state, table ? &*table : nullptr, opt.cascade.beta,
                          detail::sequence_salt(node.outages));
  };
  out.result = run_opa(net, root, order, opa);
  return out;
}

inline SearchOutcome online_search(const Network& net, const std::vector<double>& loads,
                                   const SearchStrategy& strategy, const SearchOptions& opt) {
  return online_search(net, initial_state(net, loads), strategy, opt);
}

// Exhaustive reference: every sequence, natural order, no budget.
inline SearchOutcome exhaustive_search(const Network& net, const OperatingState& root, const SearchOptions& opt) {
  SearchOutcome out;
  std::size_t found = 0;
  OpaOptions opa;
  opa.max_random_outages = opt.max_random_outages;
  opa.cascade = opt.cascade;
  opa.on_attempt = [&](const CascadePath& p, std::size_t attempts) {
    if (p.sheds()) ++found;
    out.curve.points.emplace_back(attempts, found);
  };
  out.result = run_opa(net, root, natural_order, opa);
  out.curve.total_paths = found;
  return out;
}

// ----------------------------------------------------------------- datasets

struct DatasetOptions {
  int scenarios = 1;
  int max_random_outages = 2;  // R; post-outage states are sampled when R >= 2
  double band_lo = 0.9;
  double band_hi = 1.1;
  double global_scale = 1.1;
  std::uint64_t seed = 1;
  CascadeOptions cascade;
  int jobs = 1;
};

struct DatasetMetadata {
  int n_scenarios = 0;
  int skipped = 0;  // scenarios whose initial dispatch was infeasible
  std::size_t samples = 0;
  std::size_t intact_states = 0;
  std::size_t post_outage_states = 0;
  double positive_rate = 0.0;  // positive labels / masked-in labels
  std::uint64_t seed = 0;
  double band_lo = 0.9, band_hi = 1.1, scale = 1.1;
};

struct Dataset {
  std::vector<gcn::TrainingSample> samples;
  DatasetMetadata meta;
};

// Load profile of scenario `index`: base loads * scale * U[band] per bus.
inline std::vector<double> scenario_loads(const Network& net, const DatasetOptions& opt, std::uint64_t index) {
  std::mt19937_64 rng(derive_seed(opt.seed, index));
  const auto factors = draw_load_factors(net.bus_count(), opt.band_lo, opt.band_hi, rng);
  return scale_loads(net, opt.global_scale, factors).base_loads();
}

// Labels every in-service branch of `state` by propagating its outage.
// Returns the per-branch propagation results alongside the sample.
inline gcn::TrainingSample label_state(const Network& net, const OperatingState& state, std::uint64_t graph_hash,
                                       const CascadeOptions& cascade, std::vector<std::optional<Propagation>>* children) {
  gcn::TrainingSample s;
  s.graph_hash = graph_hash;
  s.features = gcn::extract_features(net, state, cascade.beta);
  s.labels.assign(net.branch_count(), 0);
  s.mask.assign(net.branch_count(), false);
  if (children) children->assign(net.branch_count(), std::nullopt);
  for (int k = 0; k < net.branch_count(); ++k) {
    if (!state.in_service[k]) continue;
    s.mask[k] = true;
    auto prop = propagate(net, state, k, cascade);
    s.labels[k] = prop.shed > kShedToleranceMw ? 1 : 0;
    if (children) (*children)[k] = std::move(prop);
  }
  return s;
}

namespace detail {

// Samples of one scenario, or nothing when its initial dispatch is infeasible.
inline std::optional<std::vector<gcn::TrainingSample>> scenario_samples(const Network& net, std::uint64_t graph_hash,
                                                                        const DatasetOptions& opt, int index) {
  const auto loads = scenario_loads(net, opt, static_cast<std::uint64_t>(index));
  OperatingState root;
  try {
    root = state_from_dispatch(std::vector<bool>(net.branch_count(), true), loads, dcopf_initial(net, loads));
  } catch (const InfeasibleWithoutShedding&) {
    return std::nullopt;
  }
  std::vector<gcn::TrainingSample> out;
  std::vector<std::optional<Propagation>> children;
  out.push_back(label_state(net, root, graph_hash, opt.cascade, opt.max_random_outages >= 2 ? &children : nullptr));
  if (opt.max_random_outages >= 2)
    for (const auto& child : children)
      if (child) out.push_back(label_state(net, child->state, graph_hash, opt.cascade, nullptr));
  return out;
}

}  // namespace detail

inline Dataset generate_dataset(const Network& net, const DatasetOptions& opt) {
  if (opt.scenarios < 0) throw ValidationError("scenario count must be >= 0");
  const auto graph = gcn::build_line_graph(net);
  std::vector<std::optional<std::vector<gcn::TrainingSample>>> per(opt.scenarios);
  const int jobs = std::max(1, std::min(opt.jobs, opt.scenarios));
  if (jobs == 1) {
    for (int i = 0; i < opt.scenarios; ++i) per[i] = detail::scenario_samples(net, graph.signature, opt, i);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < jobs; ++w)
      pool.emplace_back([&, w] {
        for (int i = w; i < opt.scenarios; i += jobs) per[i] = detail::scenario_samples(net, graph.signature, opt, i);
      });
    for (auto& t : pool) t.join();
  }

  Dataset ds;
  ds.meta.n_scenarios = opt.scenarios;
  ds.meta.seed = opt.seed;
  ds.meta.band_lo = opt.band_lo;
  ds.meta.band_hi = opt.band_hi;
  ds.meta.scale = opt.global_scale;
  long long positives = 0, labelled = 0;
  for (auto& scenario : per) {
    if (!scenario) {
      ++ds.meta.skipped;
      continue;
    }
    for (std::size_t i = 0; i < scenario->size(); ++i) {
      auto& s = (*scenario)[i];
      (i == 0 ? ds.meta.intact_states : ds.meta.post_outage_states)++;
      for (std::size_t k = 0; k < s.labels.size(); ++k) {
        if (!s.mask[k]) continue;
        ++labelled;
        positives += s.labels[k];
      }
      ds.samples.push_back(std::move(s));
    }
  }
  ds.meta.samples = ds.samples.size();
  ds.meta.positive_rate = labelled ? static_cast<double>(positives) / static_cast<double>(labelled) : 0.0;
  return ds;
}

inline Json metadata_to_json(const DatasetMetadata& m) {
  return {{"n_scenarios", m.n_scenarios},
          {"skipped", m.skipped},
          {"samples", m.samples},
          {"intact_states", m.intact_states},
          {"post_outage_states", m.post_outage_states},
          {"positive_rate", m.positive_rate},
          {"seed", m.seed},
          {"band", {m.band_lo, m.band_hi}},
          {"scale", m.scale}};
}

inline std::string dataset_to_jsonl(const std::vector<gcn::TrainingSample>& samples) {
  std::string out;
  for (const auto& s : samples) out += gcn::sample_to_json(s).dump() + "\n";
  return out;
}

// Confusion counts of a model over the masked-in labels of a dataset.
inline gcn::Confusion evaluate(const gcn::Model& model, const gcn::HopBasis& basis,
                               const std::vector<gcn::TrainingSample>& samples) {
  gcn::Confusion cm;
  for (const auto& s : samples) cm += gcn::confusion(gcn::predict(model, basis, s.features).label, s.labels, &s.mask);
  return cm;
}

}  // namespace cfsearch
