#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <queue>
#include <random>

#include "cfsearch/search.hpp"
#include "cfsearch/train.hpp"
#include "oracles.hpp"

using namespace cfsearch;
using namespace cfsearch::gcn;

namespace {

Network toy4() { return load_case(oracle::data_path("toy4.json")); }

oracle::PlainGcn to_plain(const Model& m) {
  oracle::PlainGcn g;
  g.K = m.hyper.hops;
  g.F1 = m.hyper.filters1;
  g.F2 = m.hyper.filters2;
  auto copy_conv = [&](const GraphConv& conv, std::vector<std::vector<std::vector<double>>>& w,
                       std::vector<double>& b) {
    w.assign(g.K + 1, {});
    for (int k = 0; k <= g.K; ++k) {
      w[k].assign(conv.w[k].rows(), std::vector<double>(conv.w[k].cols()));
      for (Eigen::Index c = 0; c < conv.w[k].rows(); ++c)
        for (Eigen::Index f = 0; f < conv.w[k].cols(); ++f) w[k][c][f] = conv.w[k](c, f);
    }
    b.assign(conv.b.data(), conv.b.data() + conv.b.size());
  };
  copy_conv(m.params.conv1, g.w1, g.b1);
  copy_conv(m.params.conv2, g.w2, g.b2);
  g.fc.assign(g.F2, std::vector<double>(2));
  for (int f = 0; f < g.F2; ++f)
    for (int o = 0; o < 2; ++o) g.fc[f][o] = m.params.fc_w(f, o);
  g.fcb = {m.params.fc_b(0), m.params.fc_b(1)};
  g.scale.assign(m.feature_scale.begin(), m.feature_scale.end());
  return g;
}

Eigen::MatrixXd random_adjacency(std::mt19937_64& rng, int L, double density) {
  std::bernoulli_distribution edge(density);
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(L, L);
  for (int i = 0; i < L; ++i)
    for (int j = i + 1; j < L; ++j)
      if (edge(rng)) A(i, j) = A(j, i) = 1.0;
  return A;
}

Eigen::MatrixXd random_features(std::mt19937_64& rng, int L) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::MatrixXd X(L, kFeatureCount);
  for (int i = 0; i < L; ++i) {
    X(i, kTopology) = u(rng) < 0.15 ? 1.0 : 0.0;
    X(i, kProtection) = X(i, kTopology) ? 0.0 : 1.2 * u(rng);
    X(i, kBranchFlow) = X(i, kTopology) ? 0.0 : 300.0 * u(rng);
    X(i, kBusLoad) = 200.0 * u(rng);
  }
  return X;
}

TrainingSample random_sample(std::mt19937_64& rng, const Eigen::MatrixXd& X, std::uint64_t hash) {
  std::bernoulli_distribution pos(0.3);
  TrainingSample s;
  s.features = X;
  s.graph_hash = hash;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    s.mask.push_back(X(i, kTopology) == 0.0);
    s.labels.push_back(s.mask.back() && pos(rng) ? 1 : 0);
  }
  return s;
}

Hyper hyper(int K, int F1, int F2, std::uint64_t seed = 3) {
  Hyper h;
  h.hops = K;
  h.filters1 = F1;
  h.filters2 = F2;
  h.seed = seed;
  return h;
}

std::size_t formula(const Hyper& h) {
  const std::size_t K = h.hops, F1 = h.filters1, F2 = h.filters2, C = kFeatureCount;
  return (K + 1) * C * F1 + F1 + (K + 1) * F1 * F2 + F2 + F2 * 2 + 2;
}

std::vector<int> hop_distances(const Eigen::MatrixXd& A, int from) {
  std::vector<int> d(A.rows(), -1);
  std::queue<int> q;
  d[from] = 0;
  q.push(from);
  while (!q.empty()) {
    const int u = q.front();
    q.pop();
    for (int v = 0; v < A.rows(); ++v)
      if (A(u, v) != 0.0 && d[v] < 0) {
        d[v] = d[u] + 1;
        q.push(v);
      }
  }
  return d;
}

}  // namespace

// ---------------------------------------------------------------- line graph

TEST(LineGraph, TwoBranchesSharingABus) {
  Network net;
  net.buses = {{0, 0.0, {}}, {1, 0.0, {}}, {2, 0.0, {}}};
  net.branches = {{0, 0, 1, 0.1, 10.0}, {1, 1, 2, 0.1, 10.0}};
  const auto g = build_line_graph(net);
  Eigen::Matrix2d expected;
  expected << 0, 1, 1, 0;
  EXPECT_EQ(g.adjacency, Eigen::MatrixXd(expected));
  EXPECT_TRUE(g.normalized.isApprox(Eigen::MatrixXd(expected), 1e-15));
}

TEST(LineGraph, Toy4BridgeAdjacentToBranchesAtItsBus) {
  const auto g = build_line_graph(toy4());
  EXPECT_EQ(g.adjacency(3, 0), 0.0);
  EXPECT_EQ(g.adjacency(3, 1), 1.0);
  EXPECT_EQ(g.adjacency(3, 2), 1.0);
  EXPECT_EQ(g.degree(3), 2.0);
}

TEST(LineGraph, MatchesPairwiseOracleAndSpectralBound) {
  std::vector<Network> nets = {load_case(oracle::data_path("rts79.json"))};
  std::mt19937_64 rng(17);
  for (int i = 0; i < 50; ++i) nets.push_back(oracle::random_network(rng, 2, 20, 40));
  for (const auto& net : nets) {
    const auto g = build_line_graph(net);
    ASSERT_EQ(g.nodes(), net.branch_count());
    EXPECT_EQ(g.adjacency, oracle::line_adjacency(net));
    EXPECT_TRUE((g.adjacency - g.adjacency.transpose()).isZero(0.0));
    EXPECT_TRUE(g.adjacency.diagonal().isZero(0.0));
    EXPECT_LT((g.normalized - oracle::normalize(g.adjacency)).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_LT((g.normalized - g.normalized.transpose()).cwiseAbs().maxCoeff(), 1e-15);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(g.normalized);
    EXPECT_LE(eig.eigenvalues().cwiseAbs().maxCoeff(), 1.0 + 1e-10);
  }
  EXPECT_EQ(build_line_graph(nets[0]).nodes(), 38);
}

TEST(LineGraph, IsolatedNodeGetsZeroRow) {
  const auto g = line_graph_from_adjacency(Eigen::MatrixXd::Zero(3, 3));
  EXPECT_TRUE(g.normalized.isZero(0.0));
  EXPECT_FALSE(g.normalized.hasNaN());
}

TEST(LineGraph, SignatureDistinguishesTopologies) {
  const Network net = toy4();
  Network other = net;
  other.branches[3].from_bus = 1;
  EXPECT_EQ(build_line_graph(net).signature, build_line_graph(toy4()).signature);
  EXPECT_NE(build_line_graph(net).signature, build_line_graph(other).signature);
  EXPECT_EQ(hash_from_hex(hash_to_hex(0x0123456789abcdefull)), 0x0123456789abcdefull);
  EXPECT_THROW(hash_from_hex("xyz"), ParseError);
}

// ------------------------------------------------------------------ features

TEST(Features, ZeroLoadStateIsAllZero) {
  const Network net = toy4();
  const auto s = initial_state(net, std::vector<double>(4, 0.0));
  EXPECT_TRUE(extract_features(net, s, 1.1).isZero(0.0));
}

TEST(Features, Toy4LoadedBridgeRatio) {
  const Network net = toy4();
  const auto s = initial_state(net, net.base_loads());
  const auto X = extract_features(net, s, 1.1);
  EXPECT_NEAR(X(3, kProtection), 100.0 / (1.1 * 120.0), 1e-12);
  EXPECT_NEAR(X(3, kProtection), 0.7576, 5e-5);
  EXPECT_NEAR(X(3, kBranchFlow), 100.0, 1e-9);
  EXPECT_EQ(X(3, kBusLoad), 100.0);
  EXPECT_EQ(X(3, kTopology), 0.0);
}

TEST(Features, OutOfServiceBranchFlagged) {
  const Network net = toy4();
  auto s = initial_state(net, net.base_loads());
  const auto r = propagate(net, s, 0);
  const auto X = extract_features(net, r.state, 1.1);
  EXPECT_EQ(X(0, kTopology), 1.0);
  EXPECT_EQ(X(0, kBranchFlow), 0.0);
  EXPECT_EQ(X(0, kProtection), 0.0);
  for (int k = 1; k < 4; ++k) EXPECT_EQ(X(k, kTopology), 0.0);
  EXPECT_GE(X.minCoeff(), 0.0);
}

// ------------------------------------------------------------------- forward

TEST(Forward, MatchesStraightLineOracle) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 6; ++trial) {
    const int L = 5 + 3 * trial;
    const auto g = line_graph_from_adjacency(random_adjacency(rng, L, 0.3));
    const Hyper h = hyper(trial % 4, 3 + trial, 2 + trial % 3, trial);
    const Model m = init_model(h, g.signature);
    const HopBasis basis(g, h.hops);
    const auto X = random_features(rng, L);
    const auto c = forward(m, basis, X);
    Eigen::MatrixXd logits;
    const auto prob = oracle::plain_forward(to_plain(m), g.normalized, X, &logits);
    EXPECT_LT((c.logits - logits).cwiseAbs().maxCoeff(), 1e-12) << trial;
    EXPECT_LT((c.prob - prob).cwiseAbs().maxCoeff(), 1e-12) << trial;
    for (int i = 0; i < L; ++i) {
      EXPECT_NEAR(c.prob.row(i).sum(), 1.0, 1e-12);
      EXPECT_GT(c.prob.row(i).minCoeff(), 0.0);
    }
  }
}

TEST(Forward, ZeroWeightsGiveEvenOdds) {
  const auto g = build_line_graph(toy4());
  Model m = init_model(Hyper{}, g.signature);
  m.params = zero_parameters(m.hyper);
  std::mt19937_64 rng(1);
  const auto c = forward(m, HopBasis(g, 3), random_features(rng, 4));
  EXPECT_TRUE(c.prob.isApproxToConstant(0.5, 1e-15));
}

TEST(Forward, ShapeAndSignatureMismatchRejected) {
  const auto g = build_line_graph(toy4());
  const Model m = init_model(Hyper{}, g.signature);
  const HopBasis basis(g, 3);
  EXPECT_THROW(forward(m, basis, Eigen::MatrixXd::Zero(5, 4)), ValidationError);
  EXPECT_THROW(forward(m, basis, Eigen::MatrixXd::Zero(4, 3)), ValidationError);
  const auto rts = build_line_graph(load_case(oracle::data_path("rts79.json")));
  EXPECT_THROW(forward(m, HopBasis(rts, 3), Eigen::MatrixXd::Zero(38, 4)), ValidationError);
  EXPECT_THROW(forward(m, HopBasis(g, 2), Eigen::MatrixXd::Zero(4, 4)), ValidationError);
}

TEST(Forward, HopZeroModelIsNodeLocal) {
  std::mt19937_64 rng(8);
  const auto g = line_graph_from_adjacency(random_adjacency(rng, 10, 0.5));
  const Model m = init_model(hyper(0, 8, 4), g.signature);
  const HopBasis basis(g, 0);
  const auto X = random_features(rng, 10);
  const auto base = forward(m, basis, X).logits;
  for (int j = 0; j < 10; ++j) {
    Eigen::MatrixXd Y = X;
    Y.row(j) *= 1.7;
    Y(j, kBusLoad) += 40.0;
    const auto out = forward(m, basis, Y).logits;
    for (int i = 0; i < 10; ++i)
      if (i != j) EXPECT_EQ(out.row(i), base.row(i));
  }
}

TEST(Forward, OutputIgnoresNodesBeyondTwoKHops) {
  std::mt19937_64 rng(21);
  // Sparse paths give long hop distances.
  for (int K : {1, 2}) {
    const auto A = random_adjacency(rng, 24, 0.09);
    const auto g = line_graph_from_adjacency(A);
    const Model m = init_model(hyper(K, 6, 3, K), g.signature);
    const HopBasis basis(g, K);
    const auto X = random_features(rng, 24);
    const auto base = forward(m, basis, X).logits;
    int checked = 0;
    for (int i = 0; i < 24; ++i) {
      const auto d = hop_distances(A, i);
      for (int j = 0; j < 24; ++j) {
        if (d[j] >= 0 && d[j] <= 2 * K) continue;
        Eigen::MatrixXd Y = X;
        Y.row(j).array() += 3.0;
        EXPECT_EQ(forward(m, basis, Y).logits.row(i), base.row(i)) << i << " " << j;
        ++checked;
      }
    }
    EXPECT_GT(checked, 0);
  }
}

TEST(Forward, PermutationEquivariance) {
  std::mt19937_64 rng(33);
  for (int trial = 0; trial < 10; ++trial) {
    const int L = 12;
    const auto A = random_adjacency(rng, L, 0.3);
    std::vector<int> perm(L);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Eigen::PermutationMatrix<Eigen::Dynamic> P(L);
    for (int i = 0; i < L; ++i) P.indices()[i] = perm[i];
    const Eigen::MatrixXd Ap = P * A * P.transpose();
    const auto g = line_graph_from_adjacency(A);
    const auto gp = line_graph_from_adjacency(Ap);
    Model m = init_model(Hyper{}, g.signature);
    Model mp = m;
    mp.graph_hash = gp.signature;
    const auto X = random_features(rng, L);
    const Eigen::MatrixXd Xp = P * X;
    const auto out = forward(m, HopBasis(g, 3), X).prob;
    const auto outp = forward(mp, HopBasis(gp, 3), Xp).prob;
    EXPECT_LT((Eigen::MatrixXd(P * out) - outp).cwiseAbs().maxCoeff(), 1e-10) << trial;
  }
}

// ---------------------------------------------------------------------- loss

TEST(Loss, EvenOddsNormalLabelsGiveLn2) {
  TrainingSample s;
  s.labels = {0, 0, 0};
  s.mask = {true, true, true};
  const Eigen::MatrixXd prob = Eigen::MatrixXd::Constant(3, 2, 0.5);
  EXPECT_NEAR(loss(prob, s, 20.0, 1.0), std::log(2.0), 1e-15);
  EXPECT_NEAR(loss_from_logits(Eigen::MatrixXd::Zero(3, 2), s, 20.0, 1.0), std::log(2.0), 1e-15);
}

TEST(Loss, WeightedMeanOverMaskedNodes) {
  TrainingSample s;
  s.labels = {1, 0, 1, 0};
  s.mask = {true, true, true, false};
  Eigen::MatrixXd prob(4, 2);
  prob << 0.8, 0.2, 0.3, 0.7, 0.1, 0.9, 0.5, 0.5;
  const double expected = (-20.0 * std::log(0.8) - std::log(0.7) - 20.0 * std::log(0.1)) / 3.0;
  EXPECT_NEAR(loss(prob, s, 20.0, 1.0), expected, 1e-12);
  Eigen::MatrixXd logits = prob.array().log().matrix();
  EXPECT_NEAR(loss_from_logits(logits, s, 20.0, 1.0), expected, 1e-12);
}

TEST(Loss, ConfidentCorrectPredictionsApproachZero) {
  TrainingSample s;
  s.labels = {1, 0};
  s.mask = {true, true};
  Eigen::MatrixXd logits(2, 2);
  logits << 40.0, -40.0, -40.0, 40.0;
  EXPECT_LT(loss_from_logits(logits, s, 20.0, 1.0), 1e-30);
}

// ------------------------------------------------------------------ backward

namespace {

struct Group {
  std::string name;
  Eigen::Index begin, size;
};

std::vector<Group> parameter_groups(const Parameters& p) {
  std::vector<Group> groups;
  Eigen::Index at = 0;
  auto add = [&](const std::string& name, Eigen::Index n) {
    groups.push_back({name, at, n});
    at += n;
  };
  Eigen::Index n = 0;
  for (const auto& w : p.conv1.w) n += w.size();
  add("conv1.w", n);
  add("conv1.b", p.conv1.b.size());
  n = 0;
  for (const auto& w : p.conv2.w) n += w.size();
  add("conv2.w", n);
  add("conv2.b", p.conv2.b.size());
  add("fc.w", p.fc_w.size());
  add("fc.b", p.fc_b.size());
  return groups;
}

}  // namespace

TEST(Backward, MatchesCentralDifferencesPerGroup) {
  std::mt19937_64 rng(4242);
  const int L = 12;
  const auto g = line_graph_from_adjacency(random_adjacency(rng, L, 0.3));
  const Model m = init_model(Hyper{}, g.signature);
  const HopBasis basis(g, 3);
  const auto X = random_features(rng, L);
  const auto s = random_sample(rng, X, g.signature);
  const auto analytic = flatten(backward(m, basis, forward(m, basis, X), s, 20.0, 1.0));

  const Eigen::VectorXd theta = flatten(m.params);
  Eigen::VectorXd numeric(theta.size());
  Model probe = m;
  const double h = 1e-5;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    Eigen::VectorXd t = theta;
    t(i) += h;
    unflatten(probe.params, t);
    const double up = loss_from_logits(forward(probe, basis, X).logits, s, 20.0, 1.0);
    t(i) -= 2.0 * h;
    unflatten(probe.params, t);
    const double down = loss_from_logits(forward(probe, basis, X).logits, s, 20.0, 1.0);
    numeric(i) = (up - down) / (2.0 * h);
  }
  for (const auto& grp : parameter_groups(m.params)) {
    const Eigen::VectorXd a = analytic.segment(grp.begin, grp.size);
    const Eigen::VectorXd n = numeric.segment(grp.begin, grp.size);
    const double rel = (a - n).norm() / std::max({a.norm(), n.norm(), 1e-12});
    EXPECT_LT(rel, 1e-5) << grp.name;
    EXPECT_GT(a.norm(), 0.0) << grp.name;
  }
}

TEST(Backward, ZeroMaskGivesZeroGradient) {
  std::mt19937_64 rng(6);
  const auto g = line_graph_from_adjacency(random_adjacency(rng, 8, 0.4));
  const Model m = init_model(Hyper{}, g.signature);
  const HopBasis basis(g, 3);
  const auto X = random_features(rng, 8);
  auto s = random_sample(rng, X, g.signature);
  s.mask.assign(8, false);
  s.labels.assign(8, 0);
  EXPECT_TRUE(flatten(backward(m, basis, forward(m, basis, X), s, 20.0, 1.0)).isZero(0.0));
}

TEST(Backward, DoublingClassWeightsDoublesGradient) {
  std::mt19937_64 rng(7);
  const auto g = line_graph_from_adjacency(random_adjacency(rng, 9, 0.4));
  const Model m = init_model(Hyper{}, g.signature);
  const HopBasis basis(g, 3);
  const auto X = random_features(rng, 9);
  const auto s = random_sample(rng, X, g.signature);
  const auto c = forward(m, basis, X);
  const auto g1 = flatten(backward(m, basis, c, s, 20.0, 1.0));
  const auto g2 = flatten(backward(m, basis, c, s, 40.0, 2.0));
  EXPECT_LT((g2 - 2.0 * g1).cwiseAbs().maxCoeff(), 1e-14 * std::max(1.0, g1.cwiseAbs().maxCoeff()));
}

// ------------------------------------------------------------ parameter count

TEST(ParameterCount, ClosedFormForManyHyperparameters) {
  EXPECT_EQ(formula(Hyper{}), 542u);
  for (int K = 0; K <= 5; ++K)
    for (int F1 : {1, 4, 16, 33})
      for (int F2 : {1, 4, 7}) {
        const Hyper h = hyper(K, F1, F2);
        EXPECT_EQ(parameter_count(init_model(h, 1).params), formula(h));
        EXPECT_EQ(static_cast<std::size_t>(flatten(zero_parameters(h)).size()), formula(h));
      }
}

TEST(ParameterCount, IndependentOfGraphSize) {
  const auto small = build_line_graph(toy4());
  const auto rts = build_line_graph(load_case(oracle::data_path("rts79.json")));
  const Model a = init_model(Hyper{}, small.signature);
  const Model b = init_model(Hyper{}, rts.signature);
  EXPECT_EQ(parameter_count(a.params), parameter_count(b.params));
}

// ------------------------------------------------------------------ training

TEST(Train, LossDecreasesOnToy4Dataset) {
  const Network net = toy4();
  DatasetOptions opt;
  opt.scenarios = 50;
  opt.seed = 11;
  auto ds = generate_dataset(net, opt);
  ASSERT_GE(ds.samples.size(), 200u);
  ds.samples.resize(200);
  Hyper h;
  h.epochs = 5;
  const auto m = train(ds.samples, build_line_graph(net), h);
  ASSERT_EQ(m.loss_trace.size(), 5u);
  for (int e = 1; e < 5; ++e) EXPECT_LT(m.loss_trace[e], m.loss_trace[e - 1]) << e;
  EXPECT_EQ(serialize_model(m), serialize_model(train(ds.samples, build_line_graph(net), h)));
}

TEST(Train, ZeroEpochsReturnsInitialization) {
  const Network net = toy4();
  DatasetOptions opt;
  opt.scenarios = 3;
  const auto ds = generate_dataset(net, opt);
  Hyper h;
  h.epochs = 0;
  const auto g = build_line_graph(net);
  const auto m = train(ds.samples, g, h);
  EXPECT_EQ(flatten(m.params), flatten(init_model(h, g.signature).params));
  EXPECT_TRUE(m.loss_trace.empty());
}

TEST(Train, MixedGraphSignaturesRejected) {
  const Network net = toy4();
  DatasetOptions opt;
  opt.scenarios = 2;
  auto samples = generate_dataset(net, opt).samples;
  samples.back().graph_hash ^= 1;
  EXPECT_THROW(train(samples, build_line_graph(net), Hyper{}), ValidationError);
}

TEST(Train, AdamStepMatchesHandComputation) {
  Adam adam(1, 0.1);
  Eigen::VectorXd p = Eigen::VectorXd::Constant(1, 1.0);
  adam.step(p, Eigen::VectorXd::Constant(1, 4.0));
  // First step moves by lr * g / (|g| + eps) in the gradient sign.
  EXPECT_NEAR(p(0), 1.0 - 0.1 * 4.0 / (4.0 + 1e-8), 1e-15);
}

// ------------------------------------------------------------------- predict

TEST(Predict, TieResolvesToNormal) {
  const auto g = build_line_graph(toy4());
  Model m = init_model(Hyper{}, g.signature);
  m.params = zero_parameters(m.hyper);
  std::mt19937_64 rng(2);
  const auto p = predict(m, HopBasis(g, 3), random_features(rng, 4));
  EXPECT_EQ(p.label, std::vector<int>(4, 0));
  for (double v : p.p_shed) EXPECT_EQ(v, 0.5);
}

TEST(Predict, ForcedShedClass) {
  const auto g = build_line_graph(toy4());
  Model m = init_model(Hyper{}, g.signature);
  m.params = zero_parameters(m.hyper);
  m.params.fc_b(kShedClass) = 3.0;
  std::mt19937_64 rng(2);
  const auto p = predict(m, HopBasis(g, 3), random_features(rng, 4));
  EXPECT_EQ(p.label, std::vector<int>(4, 1));
  for (double v : p.p_shed) EXPECT_NEAR(v, 1.0 / (1.0 + std::exp(-3.0)), 1e-15);
}

// ------------------------------------------------------------------- metrics

TEST(Metrics, AllCorrect) {
  const auto m = metrics(std::vector<int>{0, 1, 1, 0}, std::vector<int>{0, 1, 1, 0});
  EXPECT_EQ(*m.total_accuracy, 1.0);
  EXPECT_EQ(*m.hit_rate, 1.0);
  EXPECT_EQ(*m.cover_rate, 1.0);
}

TEST(Metrics, ConfusionArithmetic) {
  const auto m = metrics(Confusion{9000, 900, 10, 90});
  EXPECT_NEAR(*m.hit_rate, 90.0 / 990.0, 1e-15);
  EXPECT_NEAR(*m.hit_rate, 0.0909, 5e-5);
  EXPECT_NEAR(*m.cover_rate, 0.9, 1e-15);
  EXPECT_NEAR(*m.total_accuracy, 9090.0 / 10000.0, 1e-15);
}

TEST(Metrics, CellsCountedFromVectors) {
  const std::vector<int> pred = {0, 1, 0, 1, 1, 0};
  const std::vector<int> truth = {0, 0, 1, 1, 1, 0};
  const auto cm = confusion(pred, truth);
  EXPECT_EQ(cm.a, 2);
  EXPECT_EQ(cm.b, 1);
  EXPECT_EQ(cm.c, 1);
  EXPECT_EQ(cm.d, 2);
  const std::vector<bool> mask = {true, false, true, true, true, true};
  EXPECT_EQ(confusion(pred, truth, &mask).b, 0);
  EXPECT_THROW(confusion(pred, std::vector<int>{0}), ValidationError);
}

TEST(Metrics, UndefinedCellsReported) {
  const auto none_predicted = metrics(Confusion{10, 0, 3, 0});
  EXPECT_FALSE(none_predicted.hit_rate.has_value());
  EXPECT_EQ(*none_predicted.cover_rate, 0.0);
  const auto no_positives = metrics(Confusion{10, 2, 0, 0});
  EXPECT_FALSE(no_positives.cover_rate.has_value());
  EXPECT_FALSE(metrics(Confusion{}).total_accuracy.has_value());
}

// Reported GCN column: total 0.9988, hit 0.3013, cover 0.9961. The smallest
// confusion counts rounding to those three values must reproduce them.
TEST(Metrics, ReportedGcnColumnRecomputedFromCounts) {
  auto r4 = [](double v) { return std::round(v * 1e4) / 1e4; };
  bool found = false;
  for (long long d = 1; d <= 5000 && !found; ++d) {
    for (long long c = 0; c <= d && !found; ++c) {
      if (r4(double(d) / double(c + d)) != 0.9961) continue;
      const long long b = std::llround(d / 0.3013) - d;
      if (b < 0 || r4(double(d) / double(b + d)) != 0.3013) continue;
      // (a + d) / (a + b + c + d) = 0.9988 -> a from the error count b + c.
      const long long total = std::llround((b + c) / (1.0 - 0.9988));
      const long long a = total - b - c - d;
      if (a < 0) continue;
      const auto m = metrics(Confusion{a, b, c, d});
      if (r4(*m.total_accuracy) != 0.9988) continue;
      EXPECT_EQ(r4(*m.hit_rate), 0.3013);
      EXPECT_EQ(r4(*m.cover_rate), 0.9961);
      found = true;
    }
  }
  EXPECT_TRUE(found);
}

// --------------------------------------------------------------- model files

TEST(ModelFile, RoundTripPreservesPredictions) {
  const Network net = load_case(oracle::data_path("rts79.json"));
  const auto g = build_line_graph(net);
  Model m = init_model(Hyper{}, g.signature);
  m.loss_trace = {0.9, 0.5};
  const std::string text = serialize_model(m);
  const Model back = parse_model(text);
  EXPECT_EQ(serialize_model(back), text);
  EXPECT_EQ(flatten(back.params), flatten(m.params));
  EXPECT_EQ(back.graph_hash, m.graph_hash);
  EXPECT_EQ(back.feature_scale, m.feature_scale);
  auto loads = net.base_loads();
  for (auto& l : loads) l *= 1.1;
  const auto X = extract_features(net, initial_state(net, loads), 1.1);
  const HopBasis basis(g, 3);
  EXPECT_EQ(predict(m, basis, X).p_shed, predict(back, basis, X).p_shed);
  const Json doc = Json::parse(text);
  EXPECT_EQ(doc["version"], 1);
  EXPECT_EQ(doc["hyper"]["K"], 3);
  EXPECT_EQ(doc["layers"].size(), 2u);
  EXPECT_EQ(doc["graph_hash"].get<std::string>().size(), 16u);
}

TEST(ModelFile, MalformedDocumentsRejected) {
  const auto g = build_line_graph(toy4());
  Json doc = model_to_json(init_model(Hyper{}, g.signature));
  EXPECT_THROW(parse_model("{"), ParseError);
  Json bad = doc;
  bad["version"] = 2;
  EXPECT_THROW(model_from_json(bad), ParseError);
  bad = doc;
  bad["layers"][0]["w"].erase(0);
  EXPECT_THROW(model_from_json(bad), ParseError);
  bad = doc;
  bad["fc"]["b"] = {1.0};
  EXPECT_THROW(model_from_json(bad), ParseError);
}

TEST(DatasetFile, SampleRoundTripAndValidation) {
  std::mt19937_64 rng(3);
  const auto s = random_sample(rng, random_features(rng, 6), 77);
  const auto back = sample_from_json(sample_to_json(s));
  EXPECT_EQ(back.features, s.features);
  EXPECT_EQ(back.labels, s.labels);
  EXPECT_EQ(back.mask, s.mask);
  EXPECT_EQ(back.graph_hash, 77u);
  Json bad = sample_to_json(s);
  bad["labels"][0] = 2;
  EXPECT_THROW(sample_from_json(bad), ParseError);
  EXPECT_THROW(parse_dataset("{\"graph_hash\": \n"), ParseError);
}
