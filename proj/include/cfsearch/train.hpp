#pragma once

// Adam training of the GCN and the JSON-lines dataset format.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cfsearch/gcn.hpp"

namespace cfsearch::gcn {

class Adam {
 public:
  explicit Adam(Eigen::Index size, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), m_(Eigen::VectorXd::Zero(size)),
        v_(Eigen::VectorXd::Zero(size)) {}

  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad) {
    ++t_;
    m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
    v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(beta1_, t_);
    const double c2 = 1.0 - std::pow(beta2_, t_);
    params.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
  }

 private:
  double lr_, beta1_, beta2_, eps_;
  Eigen::VectorXd m_, v_;
  long long t_ = 0;
};

// Class weights (w1, w2) implied by the ratio, with w2 = 1.
inline std::pair<double, double> class_weights(const Hyper& h) { return {h.weight_ratio, 1.0}; }

// Trains from a fixed initialization with seeded per-epoch shuffles. The batch
// gradient is the mean of per-sample gradients. loss_trace holds the mean
// batch loss of each epoch.
inline Model train(const std::vector<TrainingSample>& data, const LineGraph& graph, const Hyper& hyper) {
  for (const auto& s : data) {
    if (s.graph_hash != graph.signature) throw ValidationError("training samples use inconsistent graph signatures");
    if (s.features.rows() != graph.nodes()) throw ValidationError("training sample has the wrong node count");
  }
  if (hyper.batch_size < 1) throw ValidationError("batch size must be >= 1");
  Model model = init_model(hyper, graph.signature);
  if (hyper.epochs <= 0 || data.empty()) return model;

  const HopBasis basis(graph, hyper.hops);
  const auto [w1, w2] = class_weights(hyper);
  Eigen::VectorXd theta = flatten(model.params);
  Adam adam(theta.size(), hyper.learning_rate);
  std::mt19937_64 rng(hyper.seed ^ 0x9e3779b97f4a7c15ull);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start < order.size(); start += hyper.batch_size) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(hyper.batch_size));
      Eigen::VectorXd grad = Eigen::VectorXd::Zero(theta.size());
      double batch_loss = 0.0;
      for (std::size_t i = start; i < end; ++i) {
        const auto& s = data[order[i]];
        const auto cache = forward(model, basis, s.features);
        batch_loss += loss_from_logits(cache.logits, s, w1, w2);
        grad += flatten(backward(model, basis, cache, s, w1, w2));
      }
      const double n = static_cast<double>(end - start);
      grad /= n;
      epoch_loss += batch_loss / n;
      ++batches;
      adam.step(theta, grad);
      unflatten(model.params, theta);
    }
    model.loss_trace.push_back(epoch_loss / batches);
  }
  return model;
}

// ------------------------------------------------------------- dataset files

inline Json sample_to_json(const TrainingSample& s) {
  std::vector<int> mask(s.mask.begin(), s.mask.end());
  return {{"graph_hash", hash_to_hex(s.graph_hash)},
          {"features", matrix_to_json(s.features)},
          {"labels", s.labels},
          {"mask", mask}};
}

inline TrainingSample sample_from_json(const Json& j) {
  try {
    TrainingSample s;
    s.graph_hash = hash_from_hex(j.at("graph_hash").get<std::string>());
    s.labels = j.at("labels").get<std::vector<int>>();
    const auto mask = j.at("mask").get<std::vector<int>>();
    s.mask.assign(mask.begin(), mask.end());
    s.features = matrix_from_json(j.at("features"), static_cast<Eigen::Index>(s.labels.size()), kFeatureCount);
    if (s.mask.size() != s.labels.size()) throw ParseError("sample: mask and labels differ in length");
    for (std::size_t i = 0; i < s.labels.size(); ++i) {
      if (s.labels[i] != 0 && s.labels[i] != 1) throw ParseError("sample: labels must be 0 or 1");
      if (!s.mask[i] && s.labels[i]) throw ValidationError("sample: positive label on a masked-out branch");
    }
    return s;
  } catch (const Json::exception& e) {
    throw ParseError(std::string("sample: ") + e.what());
  }
}

inline std::vector<TrainingSample> parse_dataset(const std::string& text) {
  std::vector<TrainingSample> out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(sample_from_json(Json::parse(line)));
    } catch (const Json::parse_error& e) {
      throw ParseError("dataset line " + std::to_string(lineno) + ": " + e.what(), e.byte);
    }
  }
  return out;
}

}  // namespace cfsearch::gcn
