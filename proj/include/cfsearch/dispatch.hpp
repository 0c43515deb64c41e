#pragma once

// Linear-programming dispatch on the DC network model: the initial minimum-cost
// OPF and the minimum-load-shedding re-dispatch, both solved island by island.

#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cfsearch/dcflow.hpp"
#include "cfsearch/errors.hpp"
#include "cfsearch/grid.hpp"
#include "cfsearch/simplex.hpp"

namespace cfsearch {

// Weight on generation cost relative to 1 MW of shed load.
inline constexpr double kCostTieBreakWeight = 1e-6;
inline constexpr double kFlowSlackMw = 1e-6;

enum class DispatchObjective { MinCost, MinShed };

// One island's dispatch: which elements it covers, the load to serve and the limits.
struct DispatchProblem {
  std::vector<int> buses;
  std::vector<int> branches;
  std::vector<int> generators;
  DispatchObjective objective = DispatchObjective::MinShed;
  std::vector<double> load;   // MW per bus of the whole network
  std::vector<double> limit;  // MW per branch of the whole network
};

struct DispatchResult {
  std::vector<double> gen_output;  // MW per generator
  std::vector<double> shed;        // MW per bus
  std::vector<double> flow;        // MW per branch
  double objective = 0.0;

  double total_shed() const { return std::accumulate(shed.begin(), shed.end(), 0.0); }
};

class InfeasibleWithoutShedding : public InfeasibleError {
 public:
  InfeasibleWithoutShedding()
      : InfeasibleError("INFEASIBLE_WITH_NO_SHED: load cannot be served within capacity and branch limits") {}
};

namespace detail {

struct IslandOutcome {
  bool feasible = false;
  double objective = 0.0;
};

// Solves one island in place into `out`. `ptdf` must be grounded inside the island.
inline IslandOutcome solve_island(const Network& net, const DispatchProblem& prob, const Eigen::MatrixXd& ptdf,
                                  bool respect_pmin, DispatchResult& out) {
  const bool min_shed = prob.objective == DispatchObjective::MinShed;
  std::vector<int> shed_buses;
  if (min_shed)
    for (int b : prob.buses)
      if (prob.load[b] > 0.0) shed_buses.push_back(b);

  const int ng = static_cast<int>(prob.generators.size());
  const int nv = ng + static_cast<int>(shed_buses.size());
  double island_load = 0.0;
  for (int b : prob.buses) island_load += prob.load[b];

  lp::LinearProgram model;
  model.c.resize(nv);
  model.lower.resize(nv);
  model.upper.resize(nv);
  for (int v = 0; v < ng; ++v) {
    const auto& g = net.generators[prob.generators[v]];
    model.c(v) = min_shed ? kCostTieBreakWeight * g.cost : g.cost;
    model.lower(v) = respect_pmin ? g.capacity_min : 0.0;
    model.upper(v) = g.capacity_max;
  }
  for (int v = ng; v < nv; ++v) {
    model.c(v) = 1.0;
    model.lower(v) = 0.0;
    model.upper(v) = prob.load[shed_buses[v - ng]];
  }
  // Injection at bus i is sum(g at i) + s_i - load_i, so each variable's flow
  // sensitivity is the PTDF column of its bus.
  auto var_bus = [&](int v) { return v < ng ? net.generators[prob.generators[v]].bus : shed_buses[v - ng]; };
  std::vector<double> base_flow(net.branch_count(), 0.0);
  for (int m : prob.branches) {
    double f = 0.0;
    for (int b : prob.buses) f -= ptdf(m, b) * prob.load[b];
    base_flow[m] = f;
  }

  struct FlowRow {
    int branch;
    bool upper_side;
  };
  std::vector<FlowRow> rows;
  auto build = [&] {
    const int m = 1 + static_cast<int>(rows.size());
    model.A = Eigen::MatrixXd::Zero(m, nv);
    model.b.resize(m);
    model.sense.assign(m, lp::RowSense::LessEqual);
    for (int v = 0; v < nv; ++v) model.A(0, v) = 1.0;
    model.b(0) = island_load;
    model.sense[0] = lp::RowSense::Equal;
    for (int r = 1; r < m; ++r) {
      const auto& fr = rows[r - 1];
      for (int v = 0; v < nv; ++v) model.A(r, v) = ptdf(fr.branch, var_bus(v));
      const double lim = prob.limit[fr.branch];
      if (fr.upper_side) {
        model.b(r) = lim - base_flow[fr.branch];
      } else {
        model.b(r) = -lim - base_flow[fr.branch];
        model.sense[r] = lp::RowSense::GreaterEqual;
      }
    }
  };

  lp::Result sol;
  std::vector<double> flow(net.branch_count(), 0.0);
  for (;;) {
    build();
    sol = lp::solve(model);
    if (sol.status != lp::Status::Optimal) return {};
    for (int m : prob.branches) {
      double f = base_flow[m];
      for (int v = 0; v < nv; ++v) f += ptdf(m, var_bus(v)) * sol.x(v);
      flow[m] = f;
    }
    bool added = false;
    for (int m : prob.branches) {
      const double lim = prob.limit[m];
      if (std::abs(flow[m]) <= lim + kFlowSlackMw) continue;
      const bool upper = flow[m] > 0.0;
      bool present = false;
      for (const auto& fr : rows) present = present || (fr.branch == m && fr.upper_side == upper);
      if (present) continue;  // numerical noise on an enforced row
      rows.push_back({m, upper});
      added = true;
    }
    if (!added) break;
  }

  for (int v = 0; v < ng; ++v) out.gen_output[prob.generators[v]] = sol.x(v);
  for (int v = ng; v < nv; ++v) out.shed[shed_buses[v - ng]] = sol.x(v) < 1e-9 ? 0.0 : sol.x(v);
  for (int m : prob.branches) out.flow[m] = flow[m];
  return {true, sol.objective};
}

}  // namespace detail

// Dispatches every island of the topology. MinCost never sheds and throws
// InfeasibleWithoutShedding when some island cannot be served; MinShed always succeeds.
inline DispatchResult dispatch(const Network& net, const std::vector<bool>& in_service,
                               const std::vector<double>& loads, DispatchObjective objective) {
  const auto islands = find_islands(net, in_service);
  const Eigen::MatrixXd X = nodal_reactance(net, in_service, islands);
  const Eigen::MatrixXd P = ptdf(net, in_service, X);

  DispatchResult out;
  out.gen_output.assign(net.generator_count(), 0.0);
  out.shed.assign(net.bus_count(), 0.0);
  out.flow.assign(net.branch_count(), 0.0);

  std::vector<DispatchProblem> problems(islands.count());
  for (int isl = 0; isl < islands.count(); ++isl) {
    problems[isl].buses = islands.members[isl];
    problems[isl].objective = objective;
  }
  for (const auto& br : net.branches)
    if (in_service[br.id]) problems[islands.of_bus[br.from_bus]].branches.push_back(br.id);
  for (const auto& g : net.generators) problems[islands.of_bus[g.bus]].generators.push_back(g.id);

  std::vector<double> limits(net.branch_count());
  for (const auto& br : net.branches) limits[br.id] = br.flow_limit_long_term;

  for (auto& prob : problems) {
    prob.load = loads;
    prob.limit = limits;
    double island_load = 0.0, island_pmin = 0.0;
    for (int b : prob.buses) island_load += loads[b];
    for (int g : prob.generators) island_pmin += net.generators[g].capacity_min;

    if (prob.generators.empty()) {
      if (objective == DispatchObjective::MinCost && island_load > 0.0) throw InfeasibleWithoutShedding();
      for (int b : prob.buses) out.shed[b] = loads[b];
      out.objective += objective == DispatchObjective::MinShed ? island_load : 0.0;
      continue;
    }
    if (objective == DispatchObjective::MinCost) {
      auto r = detail::solve_island(net, prob, P, true, out);
      if (!r.feasible) throw InfeasibleWithoutShedding();
      out.objective += r.objective;
      continue;
    }
    // Units whose minimum output cannot be absorbed are allowed to go to zero.
    const bool respect_pmin = island_pmin <= island_load;
    auto r = detail::solve_island(net, prob, P, respect_pmin, out);
    if (!r.feasible && respect_pmin) r = detail::solve_island(net, prob, P, false, out);
    if (!r.feasible) throw std::logic_error("minimum-shed dispatch reported infeasible");
    out.objective += r.objective;
  }
  return out;
}

inline DispatchResult dcopf_initial(const Network& net, const std::vector<double>& loads) {
  return dispatch(net, std::vector<bool>(net.branch_count(), true), loads, DispatchObjective::MinCost);
}

inline DispatchResult redispatch_min_shed(const Network& net, const std::vector<bool>& in_service,
                                          const std::vector<double>& loads) {
  return dispatch(net, in_service, loads, DispatchObjective::MinShed);
}

// The operating state implied by a dispatch on the given topology and loads.
inline OperatingState state_from_dispatch(const std::vector<bool>& in_service, const std::vector<double>& loads,
                                          const DispatchResult& d, double shed_before = 0.0) {
  OperatingState s;
  s.in_service = in_service;
  s.load.resize(loads.size());
  for (std::size_t i = 0; i < loads.size(); ++i) s.load[i] = std::max(0.0, loads[i] - d.shed[i]);
  s.gen_output = d.gen_output;
  s.flow = d.flow;
  s.shed_so_far = shed_before + d.total_shed();
  return s;
}

}  // namespace cfsearch
