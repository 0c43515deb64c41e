#pragma once

// DC power flow, nodal reactance matrix, line outage distribution factors and
// the physics-based branch vulnerability vector.

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cfsearch/errors.hpp"
#include "cfsearch/grid.hpp"

namespace cfsearch {

inline constexpr double kDefaultRelayThreshold = 1.1;  // beta
inline constexpr double kBridgeTolerance = 1e-8;
inline constexpr double kBalanceToleranceMw = 1e-6;

class UnbalancedIslandError : public ValidationError {
 public:
  UnbalancedIslandError(int island, double imbalance_mw)
      : ValidationError("island " + std::to_string(island) + " is unbalanced by " +
                        std::to_string(imbalance_mw) + " MW"),
        island_(island),
        imbalance_(imbalance_mw) {}
  int island() const noexcept { return island_; }
  double imbalance_mw() const noexcept { return imbalance_; }

 private:
  int island_;
  double imbalance_;
};

struct DcSolution {
  std::vector<double> angles;  // radians, ground bus of each island at 0
  std::vector<double> flow;    // MW per branch
  Islands islands;
};

// The bus each island's angles are referenced to: the network slack when it
// lies in the island, otherwise the lowest bus id.
inline int island_ground(const Network& net, const Islands& islands, int island) {
  const auto& members = islands.members[island];
  return islands.of_bus[net.slack_bus] == island ? net.slack_bus : members.front();
}

namespace detail {

// Reduced susceptance matrix of one island with its ground bus removed.
// `local` maps bus id -> row index (or -1 for the ground / other islands).
inline Eigen::MatrixXd reduced_susceptance(const Network& net, const std::vector<bool>& in_service,
                                           const Islands& islands, int island, std::vector<int>& local) {
  const int ground = island_ground(net, islands, island);
  local.assign(net.bus_count(), -1);
  int n = 0;
  for (int b : islands.members[island])
    if (b != ground) local[b] = n++;
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(n, n);
  for (const auto& br : net.branches) {
    if (!in_service[br.id] || islands.of_bus[br.from_bus] != island) continue;
    const double y = 1.0 / br.reactance;
    const int i = local[br.from_bus];
    const int j = local[br.to_bus];
    if (i >= 0) B(i, i) += y;
    if (j >= 0) B(j, j) += y;
    if (i >= 0 && j >= 0) {
      B(i, j) -= y;
      B(j, i) -= y;
    }
  }
  return B;
}

}  // namespace detail

// Net injection per bus in MW.
inline std::vector<double> bus_injections(const Network& net, const OperatingState& state) {
  std::vector<double> p(net.bus_count(), 0.0);
  for (int i = 0; i < net.bus_count(); ++i) p[i] = -state.load[i];
  for (const auto& g : net.generators) p[g.bus] += state.gen_output[g.id];
  return p;
}

inline DcSolution solve_dcpf(const Network& net, const OperatingState& state) {
  DcSolution sol;
  sol.islands = find_islands(net, state.in_service);
  sol.angles.assign(net.bus_count(), 0.0);
  sol.flow.assign(net.branch_count(), 0.0);
  const auto injection = bus_injections(net, state);

  std::vector<int> local;
  for (int isl = 0; isl < sol.islands.count(); ++isl) {
    double imbalance = 0.0;
    for (int b : sol.islands.members[isl]) imbalance += injection[b];
    if (std::abs(imbalance) > kBalanceToleranceMw) throw UnbalancedIslandError(isl, imbalance);
    if (sol.islands.members[isl].size() == 1) continue;

    Eigen::MatrixXd B = detail::reduced_susceptance(net, state.in_service, sol.islands, isl, local);
    Eigen::VectorXd p(B.rows());
    for (int b : sol.islands.members[isl])
      if (local[b] >= 0) p(local[b]) = injection[b] / kBaseMva;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(B);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
      throw ValidationError("singular island matrix in island " + std::to_string(isl));
    Eigen::VectorXd theta = ldlt.solve(p);
    for (int b : sol.islands.members[isl])
      if (local[b] >= 0) sol.angles[b] = theta(local[b]);
  }
  for (const auto& br : net.branches) {
    if (!state.in_service[br.id]) continue;
    sol.flow[br.id] = (sol.angles[br.from_bus] - sol.angles[br.to_bus]) / br.reactance * kBaseMva;
  }
  return sol;
}

// N x N nodal reactance matrix: the grounded inverse of each island's
// susceptance matrix, zero on ground rows/columns and across islands.
inline Eigen::MatrixXd nodal_reactance(const Network& net, const std::vector<bool>& in_service,
                                       const Islands& islands) {
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(net.bus_count(), net.bus_count());
  std::vector<int> local;
  for (int isl = 0; isl < islands.count(); ++isl) {
    const auto& members = islands.members[isl];
    if (members.size() == 1) continue;
    Eigen::MatrixXd B = detail::reduced_susceptance(net, in_service, islands, isl, local);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(B);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
      throw ValidationError("singular island matrix in island " + std::to_string(isl));
    Eigen::MatrixXd inv = ldlt.solve(Eigen::MatrixXd::Identity(B.rows(), B.cols()));
    for (int a : members) {
      if (local[a] < 0) continue;
      for (int b : members)
        if (local[b] >= 0) X(a, b) = inv(local[a], local[b]);
    }
  }
  return X;
}

inline Eigen::MatrixXd nodal_reactance(const Network& net, const std::vector<bool>& in_service) {
  return nodal_reactance(net, in_service, find_islands(net, in_service));
}

// M_m^T X M_k for branches m and k.
inline double transfer_reactance(const Network& net, const Eigen::MatrixXd& X, int m, int k) {
  const auto& bm = net.branches[m];
  const auto& bk = net.branches[k];
  return X(bm.from_bus, bk.from_bus) - X(bm.from_bus, bk.to_bus) - X(bm.to_bus, bk.from_bus) +
         X(bm.to_bus, bk.to_bus);
}

struct LodfTable {
  Eigen::MatrixXd nodal_reactance;  // N x N
  Eigen::MatrixXd d;                // L x L, d(m, k) = D_m^k
  std::vector<bool> bridge;         // per branch; false when out of service
  std::vector<bool> in_service;
  Islands islands;
};

inline LodfTable lodf(const Network& net, const std::vector<bool>& in_service) {
  const int L = net.branch_count();
  LodfTable t;
  t.in_service = in_service;
  t.islands = find_islands(net, in_service);
  t.nodal_reactance = nodal_reactance(net, in_service, t.islands);
  t.d = Eigen::MatrixXd::Zero(L, L);
  t.bridge.assign(L, false);
  const auto& X = t.nodal_reactance;

  std::vector<double> denom(L, 0.0);
  for (int k = 0; k < L; ++k) {
    if (!in_service[k]) continue;
    denom[k] = 1.0 - transfer_reactance(net, X, k, k) / net.branches[k].reactance;
    t.bridge[k] = std::abs(denom[k]) < kBridgeTolerance;
  }
  for (int k = 0; k < L; ++k) {
    if (!in_service[k] || t.bridge[k]) continue;
    const int island = t.islands.of_bus[net.branches[k].from_bus];
    for (int m = 0; m < L; ++m) {
      if (!in_service[m] || t.islands.of_bus[net.branches[m].from_bus] != island) continue;
      t.d(m, k) = m == k ? -1.0
                         : transfer_reactance(net, X, m, k) / net.branches[m].reactance / denom[k];
    }
  }
  return t;
}

// y^P: for each in-service branch k, the worst post-outage loading ratio over
// the other branches predicted by LODF; beta for bridges; -inf when out of service.
inline std::vector<double> physical_vulnerability(const Network& net, const OperatingState& state,
                                                  const LodfTable& table, double beta) {
  const int L = net.branch_count();
  std::vector<double> y(L, -std::numeric_limits<double>::infinity());
  for (int k = 0; k < L; ++k) {
    if (!state.in_service[k]) continue;
    if (table.bridge[k]) {
      y[k] = beta;
      continue;
    }
    double worst = 0.0;
    for (int m = 0; m < L; ++m) {
      if (m == k || !state.in_service[m]) continue;
      const double alpha =
          std::abs(state.flow[m] + table.d(m, k) * state.flow[k]) / net.branches[m].flow_limit_long_term;
      worst = std::max(worst, alpha);
    }
    y[k] = worst;
  }
  return y;
}

// Power transfer distribution factors in MW-per-MW: ptdf(m, i) is the flow on
// branch m caused by injecting 1 MW at bus i and withdrawing it at i's island ground.
inline Eigen::MatrixXd ptdf(const Network& net, const std::vector<bool>& in_service, const Eigen::MatrixXd& X) {
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(net.branch_count(), net.bus_count());
  for (const auto& br : net.branches) {
    if (!in_service[br.id]) continue;
    P.row(br.id) = (X.row(br.from_bus) - X.row(br.to_bus)) / br.reactance;
  }
  return P;
}

}  // namespace cfsearch
