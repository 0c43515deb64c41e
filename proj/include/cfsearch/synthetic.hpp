#pragma once

// Random connected grids for property tests and scale experiments.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <set>
#include <utility>
#include <vector>

#include "cfsearch/dcflow.hpp"
#include "cfsearch/grid.hpp"

namespace cfsearch {

struct SyntheticGridOptions {
  int buses = 10;
  int extra_branches = 5;        // added on top of a spanning tree
  int neighbourhood = 6;         // endpoints of any branch differ by at most this many ids
  double load_probability = 0.7;
  double generator_share = 0.3;  // fraction of buses hosting a generator
  double capacity_margin = 1.35; // total capacity / total load
  double limit_margin_lo = 1.15; // branch limit / base-case |flow|
  double limit_margin_hi = 1.8;
  double min_limit_mw = 15.0;
};

// Seeds derived from a root seed by a counter (splitmix64 finalizer).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t counter) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (counter + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline Network synthetic_grid(const SyntheticGridOptions& opt, std::uint64_t seed) {
  if (opt.buses < 2) throw ValidationError("synthetic grid needs at least two buses");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  Network net;
  net.buses.resize(opt.buses);
  for (int i = 0; i < opt.buses; ++i) {
    net.buses[i].id = i;
    net.buses[i].base_load = unit(rng) < opt.load_probability ? std::round(uniform(20.0, 120.0)) : 0.0;
  }
  std::set<std::pair<int, int>> used;
  auto add_branch = [&](int a, int b) {
    net.branches.push_back({static_cast<int>(net.branches.size()), a, b, std::round(uniform(0.05, 0.25) * 1e4) / 1e4, 1.0});
    used.insert({std::min(a, b), std::max(a, b)});
  };
  for (int i = 1; i < opt.buses; ++i) {
    std::uniform_int_distribution<int> pick(std::max(0, i - opt.neighbourhood), i - 1);
    add_branch(pick(rng), i);
  }
  int extra = 0, tries = 0;
  while (extra < opt.extra_branches && tries++ < 100 * (opt.extra_branches + 1)) {
    std::uniform_int_distribution<int> pick_bus(0, opt.buses - 1);
    const int a = pick_bus(rng);
    std::uniform_int_distribution<int> offset(1, opt.neighbourhood);
    const int b = a + offset(rng);
    if (b >= opt.buses || used.count({a, b})) continue;
    add_branch(a, b);
    ++extra;
  }

  const double total_load = std::max(net.total_load(), 1.0);
  std::vector<int> hosts(opt.buses);
  for (int i = 0; i < opt.buses; ++i) hosts[i] = i;
  std::shuffle(hosts.begin(), hosts.end(), rng);
  const int ngen = std::max(1, static_cast<int>(std::round(opt.generator_share * opt.buses)));
  hosts.resize(ngen);
  std::sort(hosts.begin(), hosts.end());
  std::vector<double> share(ngen);
  for (auto& s : share) s = uniform(0.5, 1.5);
  const double share_sum = [&] {
    double s = 0.0;
    for (double x : share) s += x;
    return s;
  }();
  for (int g = 0; g < ngen; ++g) {
    Generator gen;
    gen.id = g;
    gen.bus = hosts[g];
    gen.capacity_max = std::round(opt.capacity_margin * total_load * share[g] / share_sum);
    gen.capacity_max = std::max(gen.capacity_max, 1.0);
    gen.cost = std::round(uniform(5.0, 60.0));
    net.generators.push_back(gen);
  }
  net.slack_bus = hosts.front();
  link_generators(net);

  // Limits relative to the flows of a capacity-proportional dispatch.
  OperatingState base;
  base.in_service.assign(net.branch_count(), true);
  base.load = net.base_loads();
  base.gen_output.resize(ngen);
  const double cap = net.total_capacity();
  for (int g = 0; g < ngen; ++g) base.gen_output[g] = net.total_load() * net.generators[g].capacity_max / cap;
  const auto flows = solve_dcpf(net, base).flow;
  for (auto& br : net.branches) {
    const double f = std::abs(flows[br.id]) * uniform(opt.limit_margin_lo, opt.limit_margin_hi);
    br.flow_limit_long_term = std::round(std::max(f, opt.min_limit_mw));
  }
  validate(net);
  return net;
}

}  // namespace cfsearch
