#include <gtest/gtest.h>

#include <cmath>

#include "../support/network_oracle.hpp"
#include "ncv/adam.hpp"
#include "ncv/network.hpp"

using namespace ncv;

namespace {

RowMatrix random_rows(int rows, int cols, std::uint64_t seed) {
  RandomStream rng(seed, StreamDomain::Test, 0);
  RowMatrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

}  // namespace

TEST(Architecture, ParameterCount) {
  const auto a = make_architecture(1, 1, 3, 50);
  EXPECT_EQ(a.layers, (std::vector<int>{2, 51, 51, 51, 1}));
  EXPECT_EQ(a.affine_parameter_count(), 2u * 51 + 51 + 2 * (51u * 51 + 51) + 51 + 1);
  EXPECT_EQ(a.parameter_count(), a.affine_parameter_count() + 4);
  EXPECT_EQ(Network(a).params().size(), a.parameter_count());
}

TEST(Forward, ZeroWeightsGiveLastBias) {
  Architecture a{{3, 5, 2}, true};
  Network net(a);
  auto& p = net.params();
  const std::size_t last_bias = 3 * 5 + 5 * 2 + 5;
  p[last_bias] = 0.7;
  p[last_bias + 1] = -1.2;
  const auto out = net.forward(random_rows(10, 3, 1), false);
  for (int r = 0; r < 10; ++r) {
    EXPECT_EQ(out(r, 0), 0.7);
    EXPECT_EQ(out(r, 1), -1.2);
  }
}

TEST(Forward, SingleAffineLayer) {
  Architecture a{{3, 2}, false};
  Network net(a);
  RandomStream rng(2, StreamDomain::Test, 0);
  for (auto& v : net.params()) v = rng.normal();
  const auto x = random_rows(7, 3, 3);
  Eigen::Map<const RowMatrix> W(net.params().data(), 2, 3);
  Eigen::Map<const Eigen::RowVectorXd> b(net.params().data() + 6, 2);
  const RowMatrix expected = (x * W.transpose()).rowwise() + b;
  EXPECT_LT((net.forward(x, false) - expected).norm(), 1e-13);
}

TEST(Forward, MatchesReferenceImplementation) {
  for (std::uint64_t i = 0; i < 5; ++i) {
    auto c = oracle::random_gradient_case(i);
    const auto stats = batch_stats(c.inputs);
    RowMatrix out;
    c.net.forward_with(c.inputs, stats, out);
    EXPECT_LT((out - oracle::reference_forward(c.net.arch(), c.net.params(), c.inputs, stats)).norm(),
              1e-12);
  }
}

TEST(Forward, PiecewiseLinearAlongSegments) {
  Architecture a{{2, 8, 8, 1}, true};
  Network net(a);
  RandomStream rng(4, StreamDomain::Test, 0);
  net.initialize(rng);
  const BatchNormStats running{net.running_mean(), net.running_var()};
  int checked = 0;
  for (int trial = 0; trial < 200 && checked < 20; ++trial) {
    RowMatrix ends = random_rows(2, 2, 100 + trial);
    ends.row(1) = ends.row(0) + 0.05 * ends.row(1);
    RowMatrix pts(11, 2);
    for (int k = 0; k <= 10; ++k) pts.row(k) = ends.row(0) + (k / 10.0) * (ends.row(1) - ends.row(0));
    RowMatrix out;
    Network::Tape tape;
    net.forward_tape(pts, running, out, tape);
    // Hidden activations are the inputs of layers 2 and 3; both endpoints
    // sharing a pattern means no rectifier crosses zero along the segment
    // (each pre-activation is affine in the segment parameter).
    bool same = true;
    for (std::size_t l = 1; l < tape.activations.size(); ++l)
      for (Eigen::Index u = 0; u < tape.activations[l].cols(); ++u)
        same &= (tape.activations[l](0, u) > 0) == (tape.activations[l](10, u) > 0);
    if (!same) continue;
    ++checked;
    for (int k = 0; k <= 10; ++k) {
      const double lin = out(0, 0) + (k / 10.0) * (out(10, 0) - out(0, 0));
      EXPECT_NEAR(out(k, 0), lin, 1e-12 * (1 + std::abs(lin)));
    }
  }
  EXPECT_GE(checked, 10);
}

TEST(Forward, TrainingUpdatesRunningStatistics) {
  Architecture a{{2, 4, 1}, true};
  Network net(a);
  RowMatrix x = random_rows(100, 2, 5);
  x.col(0).array() += 3.0;
  const auto stats = batch_stats(x);
  net.forward(x, true);
  EXPECT_NEAR(net.running_mean()(0), 0.1 * stats.mean(0), 1e-14);
  EXPECT_NEAR(net.running_var()(1), 0.9 + 0.1 * stats.var(1) * 100 / 99, 1e-14);
  EXPECT_GE(net.running_var().minCoeff(), 0.0);
}

TEST(Forward, RejectsWrongInputWidth) {
  Network net(Architecture{{2, 4, 1}, true});
  EXPECT_THROW(net.forward(random_rows(3, 3, 6), false), std::invalid_argument);
}

TEST(Gradient, FiniteDifferenceTwentyCases) {
  for (std::uint64_t i = 0; i < 20; ++i) {
    auto c = oracle::random_gradient_case(i, i % 4 != 3);
    const auto check = oracle::check_gradient(c.net, c.inputs, c.loss);
    SCOPED_TRACE(i);
    EXPECT_LT(check.max_rel_error, 1e-4);
  }
}

TEST(Gradient, ConstantLossHasZeroGradient) {
  auto c = oracle::random_gradient_case(0);
  std::vector<double> grad;
  gradient(c.net, c.inputs,
           [](const RowMatrix& o, RowMatrix& d) {
             d.setZero(o.rows(), o.cols());
             return 3.0;
           },
           grad);
  for (double g : grad) EXPECT_EQ(g, 0.0);
}

TEST(Gradient, MeanSquaredOutputLastBias) {
  auto c = oracle::random_gradient_case(1);
  std::vector<double> grad;
  RowMatrix out;
  gradient(c.net, c.inputs,
           [&](const RowMatrix& o, RowMatrix& d) {
             out = o;
             d = 2.0 * o / static_cast<double>(o.rows());
             return o.array().square().sum() / o.rows();
           },
           grad);
  const auto& a = c.net.arch();
  const std::size_t last_bias = a.affine_parameter_count() - a.outputs();
  for (int j = 0; j < a.outputs(); ++j)
    EXPECT_NEAR(grad[last_bias + j], 2.0 * out.col(j).mean(), 1e-12);
}

TEST(Network, LipschitzBoundHolds) {
  Architecture a{{3, 16, 16, 2}, true};
  Network net(a);
  RandomStream rng(7, StreamDomain::Test, 0);
  net.initialize(rng);
  net.running_var() = Eigen::Vector3d(0.5, 2.0, 1.0);
  const double L = net.lipschitz_bound();
  for (int i = 0; i < 100; ++i) {
    const RowMatrix x = random_rows(2, 3, 200 + i);
    const RowMatrix y = net.forward(x, false);
    EXPECT_LE((y.row(0) - y.row(1)).norm(), L * (x.row(0) - x.row(1)).norm() * (1 + 1e-12));
  }
}

TEST(Network, Deterministic) {
  auto c = oracle::random_gradient_case(2);
  std::vector<double> g1, g2;
  gradient(c.net, c.inputs, c.loss, g1);
  gradient(c.net, c.inputs, c.loss, g2);
  EXPECT_EQ(g1, g2);
}

TEST(Network, JsonRoundTrip) {
  auto c = oracle::random_gradient_case(3);
  c.net.running_mean().setConstant(0.25);
  const auto back = network_from_json(network_to_json(c.net));
  EXPECT_EQ(back.arch(), c.net.arch());
  EXPECT_EQ(back.params(), c.net.params());
  EXPECT_EQ(back.running_mean(), c.net.running_mean());
  EXPECT_EQ(back.running_var(), c.net.running_var());
}

TEST(Adam, ZeroGradientLeavesParameters) {
  AdamState s(3);
  std::vector<double> p{1.0, 2.0, 3.0}, g(3, 0.0);
  adam_step(s, p, g);
  EXPECT_EQ(p, (std::vector<double>{1.0, 2.0, 3.0}));
  EXPECT_EQ(s.step, 1);
}

TEST(Adam, ConstantGradientStepTendsToLearningRate) {
  AdamState s(2, 1e-3);
  std::vector<double> p{0.0, 0.0}, g{0.5, -4.0};
  for (int i = 0; i < 1000; ++i) {
    const auto before = p;
    adam_step(s, p, g);
    if (i == 0 || i == 999) {
      EXPECT_NEAR(before[0] - p[0], 1e-3, 1e-9);
      EXPECT_NEAR(p[1] - before[1], 1e-3, 1e-9);
    }
  }
  for (double v : s.v) EXPECT_GE(v, 0.0);
}

TEST(Adam, QuadraticBowlConverges) {
  AdamState s(1, 1e-3);
  std::vector<double> x{1.0}, g(1);
  int steps = 0;
  while (std::abs(x[0]) >= 1e-3 && steps < 5000) {
    g[0] = 2 * x[0];
    adam_step(s, x, g);
    ++steps;
  }
  EXPECT_LT(std::abs(x[0]), 1e-3);
}
