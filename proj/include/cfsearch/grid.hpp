#pragma once

// Grid data model: buses, branches, generators, operating states, and the
// JSON case-file format.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <random>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cfsearch/errors.hpp"

namespace cfsearch {

using Json = nlohmann::json;

// System base for per-unit conversion. Flows and loads are stored in MW.
inline constexpr double kBaseMva = 100.0;
inline constexpr double kDefaultGeneratorCost = 1.0;

struct Bus {
  int id = 0;
  double base_load = 0.0;      // MW
  std::vector<int> generators; // filled from Generator::bus on construction

  bool operator==(const Bus&) const = default;
};

struct Branch {
  int id = 0;
  int from_bus = 0;
  int to_bus = 0;
  double reactance = 0.0;             // per unit on kBaseMva
  double flow_limit_long_term = 0.0;  // MW

  bool operator==(const Branch&) const = default;
};

struct Generator {
  int id = 0;
  int bus = 0;
  double capacity_max = 0.0;  // MW
  double capacity_min = 0.0;  // MW
  double cost = kDefaultGeneratorCost;

  bool operator==(const Generator&) const = default;
};

struct Network {
  std::vector<Bus> buses;
  std::vector<Branch> branches;
  std::vector<Generator> generators;
  int slack_bus = 0;

  int bus_count() const { return static_cast<int>(buses.size()); }
  int branch_count() const { return static_cast<int>(branches.size()); }
  int generator_count() const { return static_cast<int>(generators.size()); }

  std::vector<double> base_loads() const {
    std::vector<double> out(buses.size());
    for (const auto& b : buses) out[b.id] = b.base_load;
    return out;
  }
  double total_load() const {
    double s = 0.0;
    for (const auto& b : buses) s += b.base_load;
    return s;
  }
  double total_capacity() const {
    double s = 0.0;
    for (const auto& g : generators) s += g.capacity_max;
    return s;
  }

  bool operator==(const Network&) const = default;
};

// A dispatch snapshot. `load` is the load currently served at each bus; load
// that has been shed stays shed for the rest of a cascade.
struct OperatingState {
  std::vector<bool> in_service;   // per branch
  std::vector<double> load;       // MW per bus
  std::vector<double> gen_output; // MW per generator
  std::vector<double> flow;       // MW per branch, from->to positive
  double shed_so_far = 0.0;       // MW

  int in_service_count() const {
    return static_cast<int>(std::count(in_service.begin(), in_service.end(), true));
  }
};

// Connected components of the bus graph restricted to in-service branches.
struct Islands {
  std::vector<int> of_bus;                // island index per bus
  std::vector<std::vector<int>> members;  // buses per island, ascending

  int count() const { return static_cast<int>(members.size()); }
};

inline Islands find_islands(const Network& net, const std::vector<bool>& in_service) {
  const int n = net.bus_count();
  std::vector<std::vector<int>> adj(n);
  for (const auto& br : net.branches) {
    if (!in_service[br.id]) continue;
    adj[br.from_bus].push_back(br.to_bus);
    adj[br.to_bus].push_back(br.from_bus);
  }
  Islands out;
  out.of_bus.assign(n, -1);
  std::vector<int> stack;
  for (int start = 0; start < n; ++start) {
    if (out.of_bus[start] >= 0) continue;
    const int id = out.count();
    out.members.emplace_back();
    out.of_bus[start] = id;
    stack.push_back(start);
    while (!stack.empty()) {
      const int v = stack.back();
      stack.pop_back();
      out.members[id].push_back(v);
      for (int w : adj[v]) {
        if (out.of_bus[w] < 0) {
          out.of_bus[w] = id;
          stack.push_back(w);
        }
      }
    }
    std::sort(out.members[id].begin(), out.members[id].end());
  }
  return out;
}

inline Islands find_islands(const Network& net) {
  return find_islands(net, std::vector<bool>(net.branches.size(), true));
}

// Checks every type invariant. Throws ValidationError naming the first violation.
inline void validate(const Network& net) {
  const int n = net.bus_count();
  if (n == 0) throw ValidationError("network must have at least one bus");
  for (int i = 0; i < n; ++i) {
    const auto& b = net.buses[i];
    if (b.id != i) throw ValidationError("bus ids must be dense 0..N-1");
    if (!(b.base_load >= 0.0) || !std::isfinite(b.base_load))
      throw ValidationError("bus " + std::to_string(i) + ": load must be >= 0");
  }
  for (int k = 0; k < net.branch_count(); ++k) {
    const auto& br = net.branches[k];
    const std::string tag = "branch " + std::to_string(k) + ": ";
    if (br.id != k) throw ValidationError("branch ids must be dense 0..L-1");
    if (br.from_bus < 0 || br.from_bus >= n || br.to_bus < 0 || br.to_bus >= n)
      throw ValidationError(tag + "endpoint references unknown bus");
    if (br.from_bus == br.to_bus) throw ValidationError(tag + "from_bus must differ from to_bus");
    if (!(br.reactance > 0.0) || !std::isfinite(br.reactance))
      throw ValidationError(tag + "reactance must be > 0");
    if (!(br.flow_limit_long_term > 0.0) || !std::isfinite(br.flow_limit_long_term))
      throw ValidationError(tag + "flow limit must be > 0");
  }
  for (int g = 0; g < net.generator_count(); ++g) {
    const auto& gen = net.generators[g];
    const std::string tag = "generator " + std::to_string(g) + ": ";
    if (gen.id != g) throw ValidationError("generator ids must be dense 0..G-1");
    if (gen.bus < 0 || gen.bus >= n) throw ValidationError(tag + "references unknown bus");
    if (!(gen.capacity_max > 0.0)) throw ValidationError(tag + "pmax must be > 0");
    if (!(gen.capacity_min >= 0.0)) throw ValidationError(tag + "pmin must be >= 0");
    if (gen.capacity_min > gen.capacity_max) throw ValidationError(tag + "pmin must be <= pmax");
    if (!(gen.cost >= 0.0)) throw ValidationError(tag + "cost must be >= 0");
  }
  if (net.slack_bus < 0 || net.slack_bus >= n) throw ValidationError("slack_bus references unknown bus");
  for (int i = 0; i < n; ++i) {
    std::vector<int> expected;
    for (const auto& gen : net.generators)
      if (gen.bus == i) expected.push_back(gen.id);
    if (net.buses[i].generators != expected)
      throw ValidationError("bus " + std::to_string(i) + ": generator list out of sync");
  }
  if (find_islands(net).count() != 1) throw ValidationError("network graph is disconnected");
}

// Rebuilds each bus's generator list from the generator table.
inline void link_generators(Network& net) {
  for (auto& b : net.buses) b.generators.clear();
  for (const auto& g : net.generators)
    if (g.bus >= 0 && g.bus < net.bus_count()) net.buses[g.bus].generators.push_back(g.id);
}

namespace detail {

inline void reject_unknown_keys(const Json& obj, std::initializer_list<const char*> allowed,
                                const std::string& where) {
  if (!obj.is_object()) throw ParseError(where + ": expected an object");
  for (const auto& [key, _] : obj.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
      throw ParseError(where + ": unknown key \"" + key + "\"");
  }
}

template <typename T>
T required(const Json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(where + ": missing key \"" + key + "\"");
  try {
    return it->get<T>();
  } catch (const Json::exception&) {
    throw ParseError(where + ": key \"" + key + "\" has the wrong type");
  }
}

template <typename T>
T optional(const Json& obj, const char* key, T fallback, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return fallback;
  try {
    return it->get<T>();
  } catch (const Json::exception&) {
    throw ParseError(where + ": key \"" + key + "\" has the wrong type");
  }
}

template <typename Item, typename Fn>
std::vector<Item> read_table(const Json& doc, const char* key, Fn&& read_one) {
  const auto& arr = doc.at(key);
  if (!arr.is_array()) throw ParseError(std::string(key) + ": expected an array");
  std::vector<Item> items;
  items.reserve(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i)
    items.push_back(read_one(arr[i], std::string(key) + "[" + std::to_string(i) + "]"));
  std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) { return a.id < b.id; });
  return items;
}

}  // namespace detail

inline Json case_to_json(const Network& net) {
  Json doc;
  doc["version"] = 1;
  doc["slack_bus"] = net.slack_bus;
  Json buses = Json::array();
  for (const auto& b : net.buses) buses.push_back({{"id", b.id}, {"load_mw", b.base_load}});
  Json branches = Json::array();
  for (const auto& br : net.branches)
    branches.push_back({{"id", br.id},
                        {"from", br.from_bus},
                        {"to", br.to_bus},
                        {"x_pu", br.reactance},
                        {"limit_mw", br.flow_limit_long_term}});
  Json gens = Json::array();
  for (const auto& g : net.generators)
    gens.push_back({{"id", g.id},
                    {"bus", g.bus},
                    {"pmax_mw", g.capacity_max},
                    {"pmin_mw", g.capacity_min},
                    {"cost", g.cost}});
  doc["buses"] = std::move(buses);
  doc["branches"] = std::move(branches);
  doc["generators"] = std::move(gens);
  return doc;
}

inline Network case_from_json(const Json& doc) {
  using namespace detail;
  reject_unknown_keys(doc, {"version", "slack_bus", "buses", "branches", "generators"}, "case");
  if (required<int>(doc, "version", "case") != 1) throw ParseError("case: unsupported version");
  for (const char* key : {"buses", "branches", "generators"})
    if (!doc.contains(key)) throw ParseError(std::string("case: missing key \"") + key + "\"");

  Network net;
  net.slack_bus = required<int>(doc, "slack_bus", "case");
  net.buses = read_table<Bus>(doc, "buses", [](const Json& j, const std::string& where) {
    reject_unknown_keys(j, {"id", "load_mw"}, where);
    Bus b;
    b.id = required<int>(j, "id", where);
    b.base_load = optional<double>(j, "load_mw", 0.0, where);
    return b;
  });
  net.branches = read_table<Branch>(doc, "branches", [](const Json& j, const std::string& where) {
    reject_unknown_keys(j, {"id", "from", "to", "x_pu", "limit_mw"}, where);
    Branch br;
    br.id = required<int>(j, "id", where);
    br.from_bus = required<int>(j, "from", where);
    br.to_bus = required<int>(j, "to", where);
    br.reactance = required<double>(j, "x_pu", where);
    br.flow_limit_long_term = required<double>(j, "limit_mw", where);
    return br;
  });
  net.generators = read_table<Generator>(doc, "generators", [](const Json& j, const std::string& where) {
    reject_unknown_keys(j, {"id", "bus", "pmax_mw", "pmin_mw", "cost"}, where);
    Generator g;
    g.id = required<int>(j, "id", where);
    g.bus = required<int>(j, "bus", where);
    g.capacity_max = required<double>(j, "pmax_mw", where);
    g.capacity_min = optional<double>(j, "pmin_mw", 0.0, where);
    g.cost = optional<double>(j, "cost", kDefaultGeneratorCost, where);
    return g;
  });
  link_generators(net);
  validate(net);
  return net;
}

// Parses and validates a case file. Syntax errors report the byte offset.
inline Network parse_case(const std::string& text) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ParseError("case: syntax error at byte " + std::to_string(e.byte) + ": " + e.what(), e.byte);
  }
  return case_from_json(doc);
}

inline std::string serialize_case(const Network& net) { return case_to_json(net).dump(2) + "\n"; }

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << text;
  if (!out) throw IoError("write failed for " + path);
}

inline Network load_case(const std::string& path) { return parse_case(read_text_file(path)); }

// Each bus load becomes base_load * factor_global * factors_per_bus[i].
inline Network scale_loads(const Network& net, double factor_global, std::span<const double> factors_per_bus) {
  if (static_cast<int>(factors_per_bus.size()) != net.bus_count())
    throw ValidationError("scale_loads: need one factor per bus");
  if (!(factor_global > 0.0)) throw ValidationError("scale_loads: factors must be > 0");
  for (double f : factors_per_bus)
    if (!(f > 0.0)) throw ValidationError("scale_loads: factors must be > 0");
  Network out = net;
  for (auto& b : out.buses) b.base_load = net.buses[b.id].base_load * factor_global * factors_per_bus[b.id];
  return out;
}

// Per-bus factors drawn uniformly from [lo, hi].
template <typename Rng>
std::vector<double> draw_load_factors(int bus_count, double lo, double hi, Rng& rng) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> f(bus_count);
  for (auto& x : f) x = dist(rng);
  return f;
}

// Order-sensitive 64-bit FNV-1a, used for graph signatures.
class Fnv1a {
 public:
  void add(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h_ ^= (v >> (8 * i)) & 0xffu;
      h_ *= 0x100000001b3ull;
    }
  }
  std::uint64_t value() const { return h_; }

 private:
  std::uint64_t h_ = 0xcbf29ce484222325ull;
};

}  // namespace cfsearch
