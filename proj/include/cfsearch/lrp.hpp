#pragma once

// Layer-wise relevance propagation (z+ rule) for the shedding logit of one
// line-graph node.
//
// Relevance flows output -> FC -> ReLU -> conv2 -> ReLU -> conv1 -> inputs.
// At each linear stage neuron j hands its relevance to inputs i in
// proportion to z+_ij = max(x_i w_ij, 0). Biases are not inputs, so they take
// no share. A neuron whose z+ all vanish keeps its relevance; that amount is
// reported as the stage's deficit.

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cfsearch/gcn.hpp"

namespace cfsearch::lrp {

struct InputScore {
  int node = 0;
  int feature = 0;
  double score = 0.0;
};

struct RelevanceReport {
  int target_branch = 0;
  double target_value = 0.0;     // shedding logit of the target node
  bool negative_target = false;  // logit <= 0: nothing to decompose
  Eigen::MatrixXd scores;        // L x 4 input relevance
  std::array<double, gcn::kFeatureCount> grouped{};
  // Relevance totals at output, FC input, conv2 input and conv1 input.
  std::vector<double> layer_sums;
  // Relevance retained by zero-denominator neurons at FC, conv2 and conv1.
  std::vector<double> deficit_per_layer;
};

namespace detail {

// Redistributes relevance through one graph convolution. `in` is the layer
// input (L x Cin, non-negative), `rel_out` the relevance on its outputs.
inline Eigen::MatrixXd through_graph_conv(const gcn::GraphConv& conv, const gcn::HopBasis& basis,
                                          const Eigen::MatrixXd& in, const Eigen::MatrixXd& rel_out,
                                          double& deficit) {
  const Eigen::Index L = in.rows(), cin = in.cols(), cout = rel_out.cols();
  Eigen::MatrixXd rel_in = Eigen::MatrixXd::Zero(L, cin);
  Eigen::MatrixXd weight(L, cin);
  for (Eigen::Index j = 0; j < L; ++j) {
    for (Eigen::Index f = 0; f < cout; ++f) {
      const double r = rel_out(j, f);
      if (r == 0.0) continue;
      // weight(i, c) = G_cf[j][i] = sum_k w_k(c, f) * Abar^k[j][i]
      weight.setZero();
      for (std::size_t k = 0; k < basis.powers.size(); ++k)
        weight.noalias() += basis.powers[k].row(j).transpose() * conv.w[k].col(f).transpose();
      const Eigen::MatrixXd z = in.cwiseProduct(weight).cwiseMax(0.0);
      const double den = z.sum();
      if (den <= 0.0) {
        deficit += r;
        continue;
      }
      rel_in.noalias() += (r / den) * z;
    }
  }
  return rel_in;
}

}  // namespace detail

// Decomposes the shedding logit of `branch`. Throws if the branch is out of service.
inline RelevanceReport explain(const gcn::Model& model, const gcn::HopBasis& basis, const Eigen::MatrixXd& X,
                               int branch) {
  gcn::check_shapes(model, basis, X);
  if (branch < 0 || branch >= X.rows()) throw ValidationError("explain: branch index out of range");
  if (X(branch, gcn::kTopology) != 0.0)
    throw ValidationError("explain: branch " + std::to_string(branch) + " is out of service");

  const auto cache = gcn::forward(model, basis, X);
  const Eigen::Index L = X.rows();
  RelevanceReport rep;
  rep.target_branch = branch;
  rep.target_value = cache.logits(branch, gcn::kShedClass);
  rep.scores = Eigen::MatrixXd::Zero(L, gcn::kFeatureCount);
  if (!(rep.target_value > 0.0)) {
    // Nothing positive to distribute; the logit itself is still reported.
    rep.negative_target = true;
    rep.layer_sums = {0.0, 0.0, 0.0, 0.0};
    rep.deficit_per_layer = {0.0, 0.0, 0.0};
    return rep;
  }

  // FC: only node `branch` feeds its own logit.
  double fc_deficit = 0.0;
  Eigen::MatrixXd rel_h2 = Eigen::MatrixXd::Zero(L, model.hyper.filters2);
  {
    Eigen::VectorXd z = cache.h2.row(branch).transpose().cwiseProduct(model.params.fc_w.col(gcn::kShedClass));
    z = z.cwiseMax(0.0);
    const double den = z.sum();
    if (den > 0.0) rel_h2.row(branch) = (rep.target_value / den) * z.transpose();
    else fc_deficit = rep.target_value;
  }
  // ReLU layers pass relevance through unchanged.
  double conv2_deficit = 0.0, conv1_deficit = 0.0;
  const Eigen::MatrixXd rel_h1 =
      detail::through_graph_conv(model.params.conv2, basis, cache.h1, rel_h2, conv2_deficit);
  rep.scores = detail::through_graph_conv(model.params.conv1, basis, cache.input, rel_h1, conv1_deficit);

  for (int c = 0; c < gcn::kFeatureCount; ++c) rep.grouped[c] = rep.scores.col(c).sum();
  rep.layer_sums = {rep.target_value, rel_h2.sum(), rel_h1.sum(), rep.scores.sum()};
  rep.deficit_per_layer = {fc_deficit, conv2_deficit, conv1_deficit};
  return rep;
}

struct ConservationAudit {
  std::vector<double> layer_sums;
  std::vector<double> deficits;  // per redistribution stage
  double max_discrepancy = 0.0;  // |sum_d - sum_{d+1} - deficit_d| over stages
  bool exact = false;            // every stage conserved within tolerance
  bool non_increasing = false;
};

inline ConservationAudit conservation_audit(const RelevanceReport& rep, double tol = 1e-8) {
  ConservationAudit a;
  a.layer_sums = rep.layer_sums;
  a.deficits = rep.deficit_per_layer;
  a.non_increasing = true;
  a.exact = true;
  const double scale = std::max(1.0, std::abs(rep.target_value));
  for (std::size_t d = 0; d + 1 < a.layer_sums.size(); ++d) {
    const double drop = a.layer_sums[d] - a.layer_sums[d + 1];
    a.max_discrepancy = std::max(a.max_discrepancy, std::abs(drop - a.deficits[d]));
    if (a.layer_sums[d + 1] > a.layer_sums[d] + tol * scale) a.non_increasing = false;
    if (std::abs(drop) > tol * scale) a.exact = false;
  }
  return a;
}

// Highest-scoring inputs, ties broken by (node, feature).
inline std::vector<InputScore> top_inputs(const RelevanceReport& rep, std::size_t count) {
  std::vector<InputScore> all;
  for (Eigen::Index i = 0; i < rep.scores.rows(); ++i)
    for (int c = 0; c < gcn::kFeatureCount; ++c) all.push_back({static_cast<int>(i), c, rep.scores(i, c)});
  std::stable_sort(all.begin(), all.end(), [](const InputScore& x, const InputScore& y) { return x.score > y.score; });
  if (all.size() > count) all.resize(count);
  return all;
}

inline Json report_to_json(const RelevanceReport& rep, std::size_t top = 10) {
  Json groups;
  for (int c = 0; c < gcn::kFeatureCount; ++c) groups[gcn::kFeatureNames[c]] = rep.grouped[c];
  Json tops = Json::array();
  for (const auto& s : top_inputs(rep, top))
    tops.push_back({{"node", s.node}, {"feature", gcn::kFeatureNames[s.feature]}, {"score", s.score}});
  Json doc = {{"branch", rep.target_branch},
              {"target", rep.target_value},
              {"groups", std::move(groups)},
              {"top_inputs", std::move(tops)},
              {"deficit_per_layer", rep.deficit_per_layer},
              {"layer_sums", rep.layer_sums}};
  doc["flags"] = rep.negative_target ? Json::array({"NEGATIVE_TARGET"}) : Json::array();
  return doc;
}

// One row per (node, feature), for bar charts.
inline std::string report_to_csv(const RelevanceReport& rep) {
  std::ostringstream out;
  out.precision(17);
  out << "node,feature,score\n";
  for (Eigen::Index i = 0; i < rep.scores.rows(); ++i)
    for (int c = 0; c < gcn::kFeatureCount; ++c) out << i << ',' << gcn::kFeatureNames[c] << ',' << rep.scores(i, c) << '\n';
  return out.str();
}

}  // namespace cfsearch::lrp
