#pragma once

// Graph convolutional network over the line graph of a power network.
//
// Every branch of the grid is a node of the line graph; two nodes are adjacent
// when their branches share a bus. The model is
//
//   input (L x 4) -> graph conv -> ReLU -> graph conv -> ReLU -> shared FC -> softmax
//
// where a graph convolution maps channel c to channel f through the filter
// G_cf = sum_k w_cfk * Abar^k, with Abar the symmetrically normalized
// adjacency. Output column 0 is the load-shedding class, column 1 normal.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cfsearch/dcflow.hpp"
#include "cfsearch/errors.hpp"
#include "cfsearch/grid.hpp"

namespace cfsearch::gcn {

inline constexpr int kFeatureCount = 4;
inline constexpr int kShedClass = 0;
inline constexpr int kNormalClass = 1;

enum Feature : int { kTopology = 0, kProtection = 1, kBranchFlow = 2, kBusLoad = 3 };
inline constexpr std::array<const char*, kFeatureCount> kFeatureNames = {"topology", "protection", "branch_flow",
                                                                         "bus_load"};

// ---------------------------------------------------------------- line graph

struct LineGraph {
  Eigen::MatrixXd adjacency;   // L x L, 0/1, zero diagonal
  Eigen::VectorXd degree;      // L
  Eigen::MatrixXd normalized;  // D^-1/2 A D^-1/2, zero rows for isolated nodes
  std::uint64_t signature = 0;

  int nodes() const { return static_cast<int>(adjacency.rows()); }
};

inline std::string hash_to_hex(std::uint64_t h) {
  std::ostringstream ss;
  ss << std::hex << std::setw(16) << std::setfill('0') << h;
  return ss.str();
}

inline std::uint64_t hash_from_hex(const std::string& s) {
  if (s.empty() || s.size() > 16) throw ParseError("bad graph hash \"" + s + "\"");
  std::uint64_t v = 0;
  for (char ch : s) {
    int d;
    if (ch >= '0' && ch <= '9') d = ch - '0';
    else if (ch >= 'a' && ch <= 'f') d = ch - 'a' + 10;
    else if (ch >= 'A' && ch <= 'F') d = ch - 'A' + 10;
    else throw ParseError("bad graph hash \"" + s + "\"");
    v = (v << 4) | static_cast<std::uint64_t>(d);
  }
  return v;
}

inline LineGraph line_graph_from_adjacency(Eigen::MatrixXd A) {
  LineGraph g;
  const int L = static_cast<int>(A.rows());
  g.adjacency = std::move(A);
  g.degree = g.adjacency.rowwise().sum();
  Eigen::VectorXd inv_sqrt(L);
  for (int i = 0; i < L; ++i) inv_sqrt(i) = g.degree(i) > 0.0 ? 1.0 / std::sqrt(g.degree(i)) : 0.0;
  g.normalized = inv_sqrt.asDiagonal() * g.adjacency * inv_sqrt.asDiagonal();
  Fnv1a h;
  h.add(static_cast<std::uint64_t>(L));
  for (int i = 0; i < L; ++i)
    for (int j = i + 1; j < L; ++j)
      if (g.adjacency(i, j) != 0.0) {
        h.add(static_cast<std::uint64_t>(i));
        h.add(static_cast<std::uint64_t>(j));
      }
  g.signature = h.value();
  return g;
}

inline LineGraph build_line_graph(const Network& net) {
  const int L = net.branch_count();
  std::vector<std::vector<int>> at_bus(net.bus_count());
  for (const auto& br : net.branches) {
    at_bus[br.from_bus].push_back(br.id);
    at_bus[br.to_bus].push_back(br.id);
  }
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(L, L);
  for (const auto& incident : at_bus)
    for (int i : incident)
      for (int j : incident)
        if (i != j) A(i, j) = 1.0;
  return line_graph_from_adjacency(std::move(A));
}

// Abar^0 .. Abar^K, precomputed once per graph.
struct HopBasis {
  std::vector<Eigen::MatrixXd> powers;
  std::uint64_t signature = 0;

  HopBasis() = default;
  HopBasis(const LineGraph& g, int K) : signature(g.signature) {
    powers.reserve(K + 1);
    powers.push_back(Eigen::MatrixXd::Identity(g.nodes(), g.nodes()));
    for (int k = 1; k <= K; ++k) powers.push_back(powers.back() * g.normalized);
  }
  int hops() const { return static_cast<int>(powers.size()) - 1; }
  int nodes() const { return powers.empty() ? 0 : static_cast<int>(powers.front().rows()); }
};

// ------------------------------------------------------------------ features

// Columns: outage indicator, |flow|/(beta*limit), |flow| MW, larger endpoint load MW.
inline Eigen::MatrixXd extract_features(const Network& net, const OperatingState& state, double beta) {
  Eigen::MatrixXd X(net.branch_count(), kFeatureCount);
  for (const auto& br : net.branches) {
    const bool out = !state.in_service[br.id];
    const double flow = out ? 0.0 : std::abs(state.flow[br.id]);
    X(br.id, kTopology) = out ? 1.0 : 0.0;
    X(br.id, kProtection) = flow / (beta * br.flow_limit_long_term);
    X(br.id, kBranchFlow) = flow;
    X(br.id, kBusLoad) = std::max(state.load[br.from_bus], state.load[br.to_bus]);
  }
  return X;
}

// --------------------------------------------------------------------- model

struct Hyper {
  int hops = 3;        // K
  int filters1 = 16;   // F1
  int filters2 = 4;    // F2
  double weight_ratio = 20.0;  // w1 / w2, with w2 = 1
  double learning_rate = 0.005;
  int epochs = 20;
  int batch_size = 32;
  std::uint64_t seed = 1;
};

struct GraphConv {
  std::vector<Eigen::MatrixXd> w;  // per hop: in_channels x out_channels
  Eigen::VectorXd b;               // out_channels
};

struct Parameters {
  GraphConv conv1, conv2;
  Eigen::MatrixXd fc_w;  // F2 x 2
  Eigen::VectorXd fc_b;  // 2
};

struct Model {
  Hyper hyper;
  Parameters params;
  std::uint64_t graph_hash = 0;
  std::array<double, kFeatureCount> feature_scale = {1.0, 1.0, 1.0 / kBaseMva, 1.0 / kBaseMva};
  std::vector<double> loss_trace;
};

inline std::size_t parameter_count(const Parameters& p) {
  std::size_t n = 0;
  for (const auto* conv : {&p.conv1, &p.conv2}) {
    for (const auto& w : conv->w) n += static_cast<std::size_t>(w.size());
    n += static_cast<std::size_t>(conv->b.size());
  }
  return n + static_cast<std::size_t>(p.fc_w.size() + p.fc_b.size());
}

inline Parameters zero_parameters(const Hyper& h) {
  Parameters p;
  p.conv1.w.assign(h.hops + 1, Eigen::MatrixXd::Zero(kFeatureCount, h.filters1));
  p.conv1.b = Eigen::VectorXd::Zero(h.filters1);
  p.conv2.w.assign(h.hops + 1, Eigen::MatrixXd::Zero(h.filters1, h.filters2));
  p.conv2.b = Eigen::VectorXd::Zero(h.filters2);
  p.fc_w = Eigen::MatrixXd::Zero(h.filters2, 2);
  p.fc_b = Eigen::VectorXd::Zero(2);
  return p;
}

// Every parameter block in a fixed order, for flattening and optimizers.
template <typename P, typename Fn>
void for_each_block(P& p, Fn&& fn) {
  for (auto* conv : {&p.conv1, &p.conv2}) {
    for (auto& w : conv->w) fn(w.data(), w.size());
    fn(conv->b.data(), conv->b.size());
  }
  fn(p.fc_w.data(), p.fc_w.size());
  fn(p.fc_b.data(), p.fc_b.size());
}

inline Eigen::VectorXd flatten(const Parameters& p) {
  Eigen::VectorXd v(parameter_count(p));
  Eigen::Index at = 0;
  for_each_block(p, [&](const double* d, Eigen::Index n) {
    v.segment(at, n) = Eigen::Map<const Eigen::VectorXd>(d, n);
    at += n;
  });
  return v;
}

inline void unflatten(Parameters& p, const Eigen::VectorXd& v) {
  Eigen::Index at = 0;
  for_each_block(p, [&](double* d, Eigen::Index n) {
    Eigen::Map<Eigen::VectorXd>(d, n) = v.segment(at, n);
    at += n;
  });
}

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases alike.
inline Model init_model(const Hyper& h, std::uint64_t graph_hash) {
  if (h.hops < 0 || h.filters1 < 1 || h.filters2 < 1) throw ValidationError("invalid GCN hyperparameters");
  Model m;
  m.hyper = h;
  m.graph_hash = graph_hash;
  m.params = zero_parameters(h);
  std::mt19937_64 rng(h.seed);
  auto fill = [&](double* d, Eigen::Index n, double fan_in) {
    const double r = 1.0 / std::sqrt(fan_in);
    std::uniform_real_distribution<double> u(-r, r);
    for (Eigen::Index i = 0; i < n; ++i) d[i] = u(rng);
  };
  const double fan1 = static_cast<double>((h.hops + 1) * kFeatureCount);
  const double fan2 = static_cast<double>((h.hops + 1) * h.filters1);
  for (auto& w : m.params.conv1.w) fill(w.data(), w.size(), fan1);
  fill(m.params.conv1.b.data(), m.params.conv1.b.size(), fan1);
  for (auto& w : m.params.conv2.w) fill(w.data(), w.size(), fan2);
  fill(m.params.conv2.b.data(), m.params.conv2.b.size(), fan2);
  fill(m.params.fc_w.data(), m.params.fc_w.size(), h.filters2);
  fill(m.params.fc_b.data(), m.params.fc_b.size(), h.filters2);
  return m;
}

// ------------------------------------------------------------------- forward

struct ForwardCache {
  Eigen::MatrixXd input;                 // scaled features, L x C
  std::vector<Eigen::MatrixXd> hop_in1;  // Abar^k * input
  Eigen::MatrixXd z1, h1;                // L x F1
  std::vector<Eigen::MatrixXd> hop_in2;  // Abar^k * h1
  Eigen::MatrixXd z2, h2;                // L x F2
  Eigen::MatrixXd logits;                // L x 2
  Eigen::MatrixXd prob;                  // L x 2
};

inline Eigen::MatrixXd scaled_input(const Model& m, const Eigen::MatrixXd& X) {
  Eigen::MatrixXd S = X;
  for (int c = 0; c < kFeatureCount; ++c) S.col(c) *= m.feature_scale[c];
  return S;
}

inline void check_shapes(const Model& m, const HopBasis& basis, const Eigen::MatrixXd& X) {
  if (basis.signature != m.graph_hash) throw ValidationError("line graph signature does not match the model");
  if (basis.hops() != m.hyper.hops) throw ValidationError("hop basis depth does not match the model");
  if (X.rows() != basis.nodes() || X.cols() != kFeatureCount)
    throw ValidationError("feature matrix shape mismatch: expected " + std::to_string(basis.nodes()) + " x " +
                          std::to_string(kFeatureCount));
}

namespace detail {

inline Eigen::MatrixXd graph_conv(const GraphConv& conv, const std::vector<Eigen::MatrixXd>& hop_in) {
  Eigen::MatrixXd z = hop_in[0] * conv.w[0];
  for (std::size_t k = 1; k < hop_in.size(); ++k) z.noalias() += hop_in[k] * conv.w[k];
  z.rowwise() += conv.b.transpose();
  return z;
}

inline std::vector<Eigen::MatrixXd> propagate_hops(const HopBasis& basis, const Eigen::MatrixXd& H) {
  std::vector<Eigen::MatrixXd> out;
  out.reserve(basis.powers.size());
  out.push_back(H);
  for (std::size_t k = 1; k < basis.powers.size(); ++k) out.push_back(basis.powers[k] * H);
  return out;
}

}  // namespace detail

inline ForwardCache forward(const Model& m, const HopBasis& basis, const Eigen::MatrixXd& X) {
  check_shapes(m, basis, X);
  ForwardCache c;
  c.input = scaled_input(m, X);
  c.hop_in1 = detail::propagate_hops(basis, c.input);
  c.z1 = detail::graph_conv(m.params.conv1, c.hop_in1);
  c.h1 = c.z1.cwiseMax(0.0);
  c.hop_in2 = detail::propagate_hops(basis, c.h1);
  c.z2 = detail::graph_conv(m.params.conv2, c.hop_in2);
  c.h2 = c.z2.cwiseMax(0.0);
  c.logits = c.h2 * m.params.fc_w;
  c.logits.rowwise() += m.params.fc_b.transpose();
  c.prob.resize(c.logits.rows(), 2);
  for (Eigen::Index i = 0; i < c.logits.rows(); ++i) {
    // p0 = 1 / (1 + e^(z1 - z0)), evaluated without overflow.
    const double diff = c.logits(i, 1) - c.logits(i, 0);
    const double e = std::exp(-std::abs(diff));
    const double small = e / (1.0 + e), large = 1.0 / (1.0 + e);
    c.prob(i, 0) = diff > 0.0 ? small : large;
    c.prob(i, 1) = diff > 0.0 ? large : small;
  }
  return c;
}

// ---------------------------------------------------------- loss & gradients

struct TrainingSample {
  Eigen::MatrixXd features;  // raw, L x 4
  std::vector<int> labels;   // 1 = disconnecting the branch sheds load
  std::vector<bool> mask;    // false for branches already out of service
  std::uint64_t graph_hash = 0;

  int masked_in() const { return static_cast<int>(std::count(mask.begin(), mask.end(), true)); }
};

// Mean weighted negative log-likelihood over masked-in nodes; w1 weighs the
// shedding class, w2 the normal class.
inline double loss(const Eigen::MatrixXd& prob, const TrainingSample& s, double w1, double w2) {
  double total = 0.0;
  int n = 0;
  for (Eigen::Index i = 0; i < prob.rows(); ++i) {
    if (!s.mask[i]) continue;
    ++n;
    total += s.labels[i] ? -w1 * std::log(prob(i, kShedClass)) : -w2 * std::log(prob(i, kNormalClass));
  }
  return n == 0 ? 0.0 : total / n;
}

// Same quantity evaluated from logits, stable when a probability underflows.
inline double loss_from_logits(const Eigen::MatrixXd& logits, const TrainingSample& s, double w1, double w2) {
  double total = 0.0;
  int n = 0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    if (!s.mask[i]) continue;
    ++n;
    const double z0 = logits(i, 0), z1 = logits(i, 1);
    const double mx = std::max(z0, z1);
    const double lse = mx + std::log(std::exp(z0 - mx) + std::exp(z1 - mx));
    total += s.labels[i] ? w1 * (lse - z0) : w2 * (lse - z1);
  }
  return n == 0 ? 0.0 : total / n;
}

// Analytic gradient of `loss` with respect to every parameter.
inline Parameters backward(const Model& m, const HopBasis& basis, const ForwardCache& c, const TrainingSample& s,
                           double w1, double w2) {
  Parameters g = zero_parameters(m.hyper);
  const Eigen::Index L = c.logits.rows();
  const int n = s.masked_in();
  if (n == 0) return g;

  Eigen::MatrixXd d_logits = Eigen::MatrixXd::Zero(L, 2);
  for (Eigen::Index i = 0; i < L; ++i) {
    if (!s.mask[i]) continue;
    const int target = s.labels[i] ? kShedClass : kNormalClass;
    const double a = (s.labels[i] ? w1 : w2) / n;
    for (int j = 0; j < 2; ++j) d_logits(i, j) = a * (c.prob(i, j) - (j == target ? 1.0 : 0.0));
  }
  g.fc_w.noalias() = c.h2.transpose() * d_logits;
  g.fc_b = d_logits.colwise().sum().transpose();

  const Eigen::MatrixXd d_z2 =
      (d_logits * m.params.fc_w.transpose()).cwiseProduct((c.z2.array() > 0.0).cast<double>().matrix());
  g.conv2.b = d_z2.colwise().sum().transpose();
  // Abar is symmetric, so the adjoint of h -> Abar^k h W_k is d -> Abar^k d W_k'.
  Eigen::MatrixXd d_h1 = Eigen::MatrixXd::Zero(L, m.hyper.filters1);
  for (std::size_t k = 0; k < basis.powers.size(); ++k) {
    g.conv2.w[k].noalias() = c.hop_in2[k].transpose() * d_z2;
    const Eigen::MatrixXd spread = k == 0 ? d_z2 : Eigen::MatrixXd(basis.powers[k] * d_z2);
    d_h1.noalias() += spread * m.params.conv2.w[k].transpose();
  }
  const Eigen::MatrixXd d_z1 = d_h1.cwiseProduct((c.z1.array() > 0.0).cast<double>().matrix());
  g.conv1.b = d_z1.colwise().sum().transpose();
  for (std::size_t k = 0; k < basis.powers.size(); ++k) g.conv1.w[k].noalias() = c.hop_in1[k].transpose() * d_z1;
  return g;
}

// ------------------------------------------------------------------- predict

struct Prediction {
  std::vector<int> label;     // 1 = predicted load shedding
  std::vector<double> p_shed; // softmax probability of the shedding class
};

// A node is predicted positive when p_shed > 0.5; an exact tie is normal.
inline Prediction predict(const Model& m, const HopBasis& basis, const Eigen::MatrixXd& X) {
  const auto c = forward(m, basis, X);
  Prediction p;
  p.label.resize(c.prob.rows());
  p.p_shed.resize(c.prob.rows());
  for (Eigen::Index i = 0; i < c.prob.rows(); ++i) {
    p.p_shed[i] = c.prob(i, kShedClass);
    p.label[i] = c.logits(i, kShedClass) > c.logits(i, kNormalClass) ? 1 : 0;
  }
  return p;
}

// ------------------------------------------------------------------- metrics

// a: normal predicted normal, b: normal predicted shed,
// c: shed predicted normal,   d: shed predicted shed.
struct Confusion {
  long long a = 0, b = 0, c = 0, d = 0;

  Confusion& operator+=(const Confusion& o) {
    a += o.a;
    b += o.b;
    c += o.c;
    d += o.d;
    return *this;
  }
  long long total() const { return a + b + c + d; }
};

struct Metrics {
  Confusion confusion;
  std::optional<double> total_accuracy;
  std::optional<double> hit_rate;    // d / (b + d)
  std::optional<double> cover_rate;  // d / (c + d)
};

inline Metrics metrics(const Confusion& cm) {
  Metrics m;
  m.confusion = cm;
  if (cm.total() > 0) m.total_accuracy = static_cast<double>(cm.a + cm.d) / static_cast<double>(cm.total());
  if (cm.b + cm.d > 0) m.hit_rate = static_cast<double>(cm.d) / static_cast<double>(cm.b + cm.d);
  if (cm.c + cm.d > 0) m.cover_rate = static_cast<double>(cm.d) / static_cast<double>(cm.c + cm.d);
  return m;
}

inline Confusion confusion(const std::vector<int>& predicted, const std::vector<int>& actual,
                           const std::vector<bool>* mask = nullptr) {
  if (predicted.size() != actual.size()) throw ValidationError("metrics: prediction and label lengths differ");
  Confusion cm;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (mask && !(*mask)[i]) continue;
    if (actual[i]) (predicted[i] ? cm.d : cm.c)++;
    else (predicted[i] ? cm.b : cm.a)++;
  }
  return cm;
}

inline Metrics metrics(const std::vector<int>& predicted, const std::vector<int>& actual) {
  return metrics(confusion(predicted, actual));
}

// --------------------------------------------------------------- model files

inline Json matrix_to_json(const Eigen::MatrixXd& M) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Eigen::MatrixXd matrix_from_json(const Json& j, Eigen::Index rows, Eigen::Index cols) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows) throw ParseError("matrix: wrong row count");
  Eigen::MatrixXd M(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (!j[i].is_array() || static_cast<Eigen::Index>(j[i].size()) != cols)
      throw ParseError("matrix: wrong column count");
    for (Eigen::Index k = 0; k < cols; ++k) M(i, k) = j[i][k].get<double>();
  }
  return M;
}

inline Json vector_to_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline Eigen::VectorXd vector_from_json(const Json& j, Eigen::Index n) {
  auto v = j.get<std::vector<double>>();
  if (static_cast<Eigen::Index>(v.size()) != n) throw ParseError("vector: wrong length");
  return Eigen::Map<Eigen::VectorXd>(v.data(), n);
}

inline Json model_to_json(const Model& m) {
  const auto& h = m.hyper;
  Json doc;
  doc["version"] = 1;
  doc["hyper"] = {{"K", h.hops},
                  {"F1", h.filters1},
                  {"F2", h.filters2},
                  {"w_ratio", h.weight_ratio},
                  {"lr", h.learning_rate},
                  {"epochs", h.epochs},
                  {"batch", h.batch_size},
                  {"seed", h.seed},
                  {"loss_reduction", "mean over masked nodes, then mean over batch"}};
  doc["graph_hash"] = hash_to_hex(m.graph_hash);
  Json layers = Json::array();
  for (const auto* conv : {&m.params.conv1, &m.params.conv2}) {
    Json w = Json::array();
    for (const auto& wk : conv->w) w.push_back(matrix_to_json(wk));
    layers.push_back({{"w", std::move(w)}, {"b", vector_to_json(conv->b)}});
  }
  doc["layers"] = std::move(layers);
  doc["fc"] = {{"w", matrix_to_json(m.params.fc_w)}, {"b", vector_to_json(m.params.fc_b)}};
  Json scale;
  for (int c = 0; c < kFeatureCount; ++c) scale[kFeatureNames[c]] = m.feature_scale[c];
  doc["feature_scale"] = std::move(scale);
  doc["loss_trace"] = m.loss_trace;
  return doc;
}

inline Model model_from_json(const Json& doc) {
  try {
    if (doc.at("version").get<int>() != 1) throw ParseError("model: unsupported version");
    Model m;
    const auto& h = doc.at("hyper");
    m.hyper.hops = h.at("K").get<int>();
    m.hyper.filters1 = h.at("F1").get<int>();
    m.hyper.filters2 = h.at("F2").get<int>();
    m.hyper.weight_ratio = h.at("w_ratio").get<double>();
    m.hyper.learning_rate = h.at("lr").get<double>();
    m.hyper.epochs = h.at("epochs").get<int>();
    m.hyper.batch_size = h.at("batch").get<int>();
    m.hyper.seed = h.at("seed").get<std::uint64_t>();
    m.graph_hash = hash_from_hex(doc.at("graph_hash").get<std::string>());
    m.params = zero_parameters(m.hyper);
    const auto& layers = doc.at("layers");
    if (!layers.is_array() || layers.size() != 2) throw ParseError("model: expected two graph layers");
    GraphConv* convs[2] = {&m.params.conv1, &m.params.conv2};
    for (int l = 0; l < 2; ++l) {
      auto& conv = *convs[l];
      const auto& w = layers[l].at("w");
      if (!w.is_array() || static_cast<int>(w.size()) != m.hyper.hops + 1) throw ParseError("model: wrong hop count");
      for (int k = 0; k <= m.hyper.hops; ++k) conv.w[k] = matrix_from_json(w[k], conv.w[k].rows(), conv.w[k].cols());
      conv.b = vector_from_json(layers[l].at("b"), conv.b.size());
    }
    m.params.fc_w = matrix_from_json(doc.at("fc").at("w"), m.hyper.filters2, 2);
    m.params.fc_b = vector_from_json(doc.at("fc").at("b"), 2);
    if (doc.contains("feature_scale"))
      for (int c = 0; c < kFeatureCount; ++c) m.feature_scale[c] = doc["feature_scale"].at(kFeatureNames[c]).get<double>();
    if (doc.contains("loss_trace")) m.loss_trace = doc["loss_trace"].get<std::vector<double>>();
    return m;
  } catch (const Json::exception& e) {
    throw ParseError(std::string("model: ") + e.what());
  }
}

inline Model parse_model(const std::string& text) {
  try {
    return model_from_json(Json::parse(text));
  } catch (const Json::parse_error& e) {
    throw ParseError(std::string("model: syntax error: ") + e.what(), e.byte);
  }
}

inline std::string serialize_model(const Model& m) { return model_to_json(m).dump() + "\n"; }

}  // namespace cfsearch::gcn
