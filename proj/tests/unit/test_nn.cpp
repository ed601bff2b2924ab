#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "hover/nn/adam.hpp"
#include "hover/nn/distribution.hpp"
#include "hover/nn/layers.hpp"
#include "hover/nn/networks.hpp"
#include "support.hpp"

namespace hover::nn {
namespace {

using test::central_difference;
using test::random_vector;

// Worst relative error over the checked coordinates; gradients below `floor`
// are compared absolutely.
double gradient_error(const std::function<double(const Vector&)>& loss, const Vector& at,
                      const Vector& analytic, const std::vector<Eigen::Index>& coords,
                      double h, double floor) {
  double worst = 0.0;
  for (Eigen::Index i : coords) {
    const double fd = central_difference(loss, at, i, h);
    const double err = std::abs(fd - analytic[i]) / std::max({std::abs(fd), std::abs(analytic[i]), floor});
    worst = std::max(worst, err);
  }
  return worst;
}

std::vector<Eigen::Index> all_coords(Eigen::Index n) {
  std::vector<Eigen::Index> out(n);
  for (Eigen::Index i = 0; i < n; ++i) out[i] = i;
  return out;
}

std::vector<Eigen::Index> sample_coords(Rng& rng, std::size_t begin, std::size_t end, int count) {
  std::uniform_int_distribution<std::size_t> pick(begin, end - 1);
  std::vector<Eigen::Index> out;
  for (int k = 0; k < count; ++k) out.push_back(static_cast<Eigen::Index>(pick(rng)));
  return out;
}

TEST(DenseLayer, ForwardAndOuterProductGradient) {
  ParameterLayout layout;
  Dense d(3, 2, layout);
  Vector p = Vector::Zero(layout.size());
  d.weight(p) << 1, 2, 3, 4, 5, 6;
  d.bias(p) << 0.5, -0.5;
  const Vector x = Eigen::Vector3d(1, -1, 2);
  const Vector y = d.forward(p, x);
  EXPECT_DOUBLE_EQ(y[0], 1 - 2 + 6 + 0.5);
  EXPECT_DOUBLE_EQ(y[1], 4 - 5 + 12 - 0.5);

  // L = y[1]: dL/dW = e1 x^T, dL/db = e1
  Vector grad = Vector::Zero(p.size());
  const Vector dx = d.backward(p, x, Eigen::Vector2d(0, 1), grad);
  const Matrix dw = ConstMatrixMap(grad.data(), 2, 3);
  EXPECT_EQ(dw.row(0), Eigen::RowVector3d::Zero());
  EXPECT_EQ(dw.row(1), x.transpose());
  EXPECT_EQ(dx, Eigen::Vector3d(4, 5, 6));
}

TEST(DenseLayer, FiniteDifference) {
  Rng rng(1);
  ParameterLayout layout;
  Dense d(7, 5, layout);
  Vector p(layout.size());
  d.initialize(p, rng, 1.0);
  p += random_vector(rng, p.size(), 0.1);
  const Vector x = random_vector(rng, 7);
  const Vector w = random_vector(rng, 5);
  auto loss_p = [&](const Vector& q) { return w.dot(d.forward(q, x)); };
  auto loss_x = [&](const Vector& xx) { return w.dot(d.forward(p, xx)); };
  Vector grad = Vector::Zero(p.size());
  const Vector dx = d.backward(p, x, w, grad);
  EXPECT_LT(gradient_error(loss_p, p, grad, all_coords(p.size()), 1e-5, 1e-8), 1e-6);
  EXPECT_LT(gradient_error(loss_x, x, dx, all_coords(7), 1e-5, 1e-8), 1e-6);
}

TEST(ConvLayer, OutputShapes) {
  ParameterLayout layout;
  Conv2D c1(2, 8, 3, 1, 8, 8, layout);
  Conv2D c2(8, 8, 4, 2, 6, 6, layout);
  EXPECT_EQ(c1.out_height(), 6);
  EXPECT_EQ(c1.out_width(), 6);
  EXPECT_EQ(c2.out_height(), 2);
  EXPECT_EQ(c2.out_size(), 32);
}

TEST(ConvLayer, MatchesDirectConvolution) {
  Rng rng(2);
  ParameterLayout layout;
  Conv2D c(2, 3, 3, 2, 7, 7, layout);
  Vector p = random_vector(rng, layout.size());
  const Vector x = random_vector(rng, c.in_size());
  const Vector y = c.forward(p, x);
  ASSERT_EQ(y.size(), 3 * 3 * 3);
  for (int o = 0; o < 3; ++o) {
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        double acc = p[3 * 2 * 9 + o];
        for (int ch = 0; ch < 2; ++ch) {
          for (int ki = 0; ki < 3; ++ki) {
            for (int kj = 0; kj < 3; ++kj) {
              acc += p[((o * 2 + ch) * 3 + ki) * 3 + kj] * x[(ch * 7 + 2 * i + ki) * 7 + 2 * j + kj];
            }
          }
        }
        EXPECT_NEAR(y[(o * 3 + i) * 3 + j], acc, 1e-13);
      }
    }
  }
}

TEST(ConvLayer, FiniteDifference) {
  Rng rng(3);
  ParameterLayout layout;
  Conv2D c(2, 4, 3, 1, 8, 8, layout);
  Vector p(layout.size());
  c.initialize(p, rng);
  p += random_vector(rng, p.size(), 0.1);
  const Vector x = random_vector(rng, c.in_size());
  const Vector w = random_vector(rng, c.out_size());
  auto loss_p = [&](const Vector& q) { return w.dot(c.forward(q, x)); };
  auto loss_x = [&](const Vector& xx) { return w.dot(c.forward(p, xx)); };
  Vector grad = Vector::Zero(p.size());
  const Vector dx = c.backward(p, x, w, grad);
  EXPECT_LT(gradient_error(loss_p, p, grad, all_coords(p.size()), 1e-5, 1e-8), 1e-6);
  EXPECT_LT(gradient_error(loss_x, x, dx, all_coords(x.size()), 1e-5, 1e-8), 1e-6);
}

TEST(Gru, GateLimits) {
  Rng rng(4);
  ParameterLayout layout;
  GruCell g(4, 6, layout);
  Vector p(layout.size());
  g.initialize(p, rng);
  const Vector x = random_vector(rng, 4);
  const Vector h = random_vector(rng, 6, 0.5);

  Vector carry = p;
  g.update_input().bias(carry).setConstant(50.0);
  EXPECT_LT((g.forward(carry, x, h) - h).norm(), 1e-15);

  Vector feed = p;
  g.update_input().bias(feed).setConstant(-50.0);
  g.reset_input().bias(feed).setConstant(50.0);
  // h' = tanh(Wc x + bc + Uc h): at h = 0 the recurrent term vanishes, and
  // atanh(h') - (Wc x + bc) is linear in h.
  const Dense& wc = g.candidate_input();
  const Vector pre_x = wc.forward(feed, x);
  const Vector zero = Vector::Zero(6);
  EXPECT_LT((g.forward(feed, x, zero) - pre_x.array().tanh().matrix()).norm(), 1e-15);
  auto rec = [&](const Vector& hh) {
    return Vector(g.forward(feed, x, hh).array().atanh().matrix() - pre_x);
  };
  const Vector h2 = random_vector(rng, 6, 0.3);
  EXPECT_LT((rec(h + h2) - rec(h) - rec(h2)).norm(), 1e-12);
  EXPECT_LT((rec(2.0 * h) - 2.0 * rec(h)).norm(), 1e-12);
}

TEST(Gru, FiniteDifference) {
  Rng rng(5);
  ParameterLayout layout;
  GruCell g(5, 7, layout);
  Vector p(layout.size());
  g.initialize(p, rng);
  p += random_vector(rng, p.size(), 0.2);
  const Vector x = random_vector(rng, 5);
  const Vector h = random_vector(rng, 7, 0.5);
  const Vector w = random_vector(rng, 7);
  auto loss_p = [&](const Vector& q) { return w.dot(g.forward(q, x, h)); };
  auto loss_x = [&](const Vector& xx) { return w.dot(g.forward(p, xx, h)); };
  auto loss_h = [&](const Vector& hh) { return w.dot(g.forward(p, x, hh)); };
  GruCell::Cache cache;
  (void)g.forward(p, x, h, &cache);
  Vector grad = Vector::Zero(p.size());
  Vector dx, dh;
  g.backward(p, cache, w, grad, dx, dh);
  EXPECT_LT(gradient_error(loss_p, p, grad, all_coords(p.size()), 1e-5, 1e-8), 1e-5);
  EXPECT_LT(gradient_error(loss_x, x, dx, all_coords(5), 1e-5, 1e-8), 1e-5);
  EXPECT_LT(gradient_error(loss_h, h, dh, all_coords(7), 1e-5, 1e-8), 1e-5);
}

Vector logits_for(double off, double on) {
  Vector l(kActionLogits);
  for (int i = 0; i < dynamics::kThrusterCount; ++i) {
    l[2 * i] = off;
    l[2 * i + 1] = on;
  }
  return l;
}

TEST(Distribution, UniformLogits) {
  const Vector l = logits_for(0.0, 0.0);
  Rng rng(6);
  const auto s = sample_multicategorical(l, rng);
  EXPECT_NEAR(s.log_prob, 12 * std::log(0.5), 1e-12);
  EXPECT_NEAR(entropy(l), 12 * std::log(2.0), 1e-12);
  EXPECT_EQ(mode_action(l), dynamics::null_action());
  for (int i = 0; i < 12; ++i) EXPECT_DOUBLE_EQ(fire_probabilities(l)[i], 0.5);
}

TEST(Distribution, SaturatedLogits) {
  const Vector l = logits_for(20.0, -20.0);
  Rng rng(7);
  for (int k = 0; k < 100; ++k) {
    const auto s = sample_multicategorical(l, rng);
    EXPECT_EQ(s.action, dynamics::null_action());
    EXPECT_NEAR(s.log_prob, 0.0, 1e-15);
  }
}

TEST(Distribution, EmpiricalFireRate) {
  const Vector l = logits_for(0.0, 1.0);
  Rng rng(8);
  long fired = 0;
  const int n = 100000;
  for (int k = 0; k < n; ++k) fired += sample_multicategorical(l, rng).action[3];
  const double expected = std::exp(1.0) / (1.0 + std::exp(1.0));
  EXPECT_NEAR(static_cast<double>(fired) / n, expected, 0.005);
}

TEST(Distribution, SampleLogProbIsConsistent) {
  Rng rng(9);
  for (int k = 0; k < 50; ++k) {
    const Vector l = random_vector(rng, kActionLogits, 2.0);
    const auto s = sample_multicategorical(l, rng);
    EXPECT_NEAR(s.log_prob, log_prob(l, s.action), 1e-12);
  }
}

TEST(Distribution, GradientsMatchFiniteDifference) {
  Rng rng(10);
  for (int k = 0; k < 10; ++k) {
    const Vector l = random_vector(rng, kActionLogits, 2.0);
    const auto s = sample_multicategorical(l, rng);
    auto lp = [&](const Vector& x) { return log_prob(x, s.action); };
    auto ent = [&](const Vector& x) { return entropy(x); };
    EXPECT_LT(gradient_error(lp, l, log_prob_gradient(l, s.action), all_coords(kActionLogits), 1e-5, 1e-8), 1e-6);
    EXPECT_LT(gradient_error(ent, l, entropy_gradient(l), all_coords(kActionLogits), 1e-5, 1e-8), 1e-6);
  }
}

TEST(Distribution, KlProperties) {
  Rng rng(11);
  const Vector a = random_vector(rng, kActionLogits);
  const Vector b = random_vector(rng, kActionLogits);
  EXPECT_NEAR(kl_divergence(a, a), 0.0, 1e-15);
  EXPECT_GT(kl_divergence(a, b), 0.0);
  // shifting both logits of a thruster leaves the distribution unchanged
  Vector shifted = a;
  shifted[0] += 3.0;
  shifted[1] += 3.0;
  EXPECT_NEAR(kl_divergence(a, shifted), 0.0, 1e-14);
  // brute-force sum over the two outcomes of thruster 0
  const double p1 = 1.0 / (1.0 + std::exp(a[0] - a[1]));
  const double q1 = 1.0 / (1.0 + std::exp(b[0] - b[1]));
  const double kl0 = p1 * std::log(p1 / q1) + (1 - p1) * std::log((1 - p1) / (1 - q1));
  Vector only0 = a;
  only0[0] = b[0];
  only0[1] = b[1];
  EXPECT_NEAR(kl_divergence(a, only0), kl0, 1e-14);
}

TEST(PolicyNet, ParameterCount) {
  PolicyNetwork net;
  EXPECT_EQ(net.parameter_count(), 129438u);
  EXPECT_EQ(net.architecture().input_size(), 135);
  EXPECT_EQ(net.conv2().out_size(), 32);
}

TEST(ValueNet, ParameterCount) {
  ValueNetwork net;
  EXPECT_EQ(net.parameter_count(), 13656u);
}

TEST(PolicyNet, ZeroWeightsGiveEvenOdds) {
  PolicyNetwork net;
  net.set_parameters(Vector::Zero(net.parameter_count()));
  Rng rng(12);
  Vector h = net.initial_hidden();
  const Vector logits = net.step(random_vector(rng, 135), h);
  EXPECT_EQ(logits, Vector::Zero(24));
  for (int i = 0; i < 12; ++i) EXPECT_EQ(fire_probabilities(logits)[i], 0.5);
}

TEST(PolicyNet, PureAndHiddenResetReproduces) {
  PolicyNetwork net;
  net.initialize(13);
  Rng rng(14);
  std::vector<Vector> xs;
  for (int t = 0; t < 4; ++t) xs.push_back(random_vector(rng, 135));
  auto run = [&] {
    Vector h = net.initial_hidden();
    std::vector<Vector> out;
    for (const auto& x : xs) out.push_back(net.step(x, h));
    return out;
  };
  const auto a = run();
  const auto b = run();
  for (std::size_t t = 0; t < xs.size(); ++t) EXPECT_EQ(a[t], b[t]);
  const auto trace = net.forward_sequence(xs, net.initial_hidden());
  for (std::size_t t = 0; t < xs.size(); ++t) EXPECT_EQ(trace.logits[t], a[t]);
}

TEST(PolicyNet, InitializationIsSeeded) {
  PolicyNetwork a, b, c;
  a.initialize(1);
  b.initialize(1);
  c.initialize(2);
  EXPECT_EQ(a.parameters(), b.parameters());
  EXPECT_NE(a.parameters(), c.parameters());
}

TEST(PolicyNet, ZeroUpstreamGivesZeroGradient) {
  PolicyNetwork net;
  net.initialize(3);
  Rng rng(4);
  std::vector<Vector> xs{random_vector(rng, 135), random_vector(rng, 135)};
  const auto trace = net.forward_sequence(xs, net.initial_hidden());
  const Vector g = net.backward_sequence(trace, {Vector::Zero(24), Vector::Zero(24)});
  EXPECT_EQ(g, Vector::Zero(net.parameter_count()));
}

TEST(PolicyNet, SequenceFiniteDifference) {
  PolicyNetwork net;
  net.initialize(21);
  Rng rng(22);
  Vector p = net.parameters();
  p += random_vector(rng, p.size(), 0.02);
  net.set_parameters(p);
  std::vector<Vector> xs, ws;
  for (int t = 0; t < 5; ++t) {
    xs.push_back(random_vector(rng, 135));
    ws.push_back(random_vector(rng, 24));
  }
  const Vector h0 = random_vector(rng, 154, 0.3);
  auto loss = [&](const Vector& q) {
    PolicyNetwork probe = net;
    probe.set_parameters(q);
    const auto tr = probe.forward_sequence(xs, h0);
    double acc = 0.0;
    for (int t = 0; t < 5; ++t) acc += ws[t].dot(tr.logits[t]);
    return acc;
  };
  const auto trace = net.forward_sequence(xs, h0);
  const Vector grad = net.backward_sequence(trace, ws);

  std::vector<Eigen::Index> coords;
  auto add = [&](std::size_t offset, std::size_t count) {
    const auto c = sample_coords(rng, offset, offset + count, 20);
    coords.insert(coords.end(), c.begin(), c.end());
  };
  add(net.conv1().offset(), net.conv1().parameter_count());
  add(net.conv2().offset(), net.conv2().parameter_count());
  add(net.fc1().offset(), net.fc1().parameter_count());
  add(net.recurrent().offset(), net.recurrent().parameter_count());
  add(net.fc3().offset(), net.fc3().parameter_count());
  add(net.output().offset(), net.output().parameter_count());
  const auto extra = sample_coords(rng, 0, p.size(), 100);
  coords.insert(coords.end(), extra.begin(), extra.end());
  EXPECT_LT(gradient_error(loss, p, grad, coords, 1e-5, 1e-6), 1e-4);
}

TEST(ValueNet, SequenceFiniteDifference) {
  ValueNetwork net;
  net.initialize(31);
  Rng rng(32);
  Vector p = net.parameters();
  p += random_vector(rng, p.size(), 0.05);
  net.set_parameters(p);
  std::vector<Vector> xs;
  std::vector<double> ws;
  for (int t = 0; t < 5; ++t) {
    xs.push_back(random_vector(rng, 13));
    ws.push_back(std::normal_distribution<double>(0.0, 1.0)(rng));
  }
  const Vector h0 = net.initial_hidden();
  auto loss = [&](const Vector& q) {
    ValueNetwork probe = net;
    probe.set_parameters(q);
    const auto tr = probe.forward_sequence(xs, h0);
    double acc = 0.0;
    for (int t = 0; t < 5; ++t) acc += ws[t] * tr.values[t];
    return acc;
  };
  const auto trace = net.forward_sequence(xs, h0);
  const Vector grad = net.backward_sequence(trace, ws);
  auto coords = sample_coords(rng, 0, p.size(), 300);
  EXPECT_LT(gradient_error(loss, p, grad, coords, 1e-5, 1e-6), 1e-4);
}

TEST(AdamOpt, ZeroGradientLeavesParameters) {
  Adam opt(4);
  Vector p = Eigen::Vector4d(1, 2, 3, 4);
  const Vector before = p;
  for (int k = 0; k < 10; ++k) opt.descend(p, Vector::Zero(4));
  EXPECT_EQ(p, before);
}

TEST(AdamOpt, ConstantGradientStepsApproachLearningRate) {
  AdamConfig cfg;
  cfg.learning_rate = 1e-3;
  Adam opt(2, cfg);
  Vector p = Vector::Zero(2);
  const Vector g = Eigen::Vector2d(5.0, -0.01);
  Vector prev = p;
  for (int k = 0; k < 2000; ++k) {
    prev = p;
    opt.descend(p, g);
  }
  const Vector step = p - prev;
  EXPECT_NEAR(step[0], -1e-3, 1e-9);
  EXPECT_NEAR(step[1], 1e-3, 1e-6);
  EXPECT_EQ(opt.state().steps, 2000);
}

TEST(AdamOpt, FirstStepIsLearningRateTimesSign) {
  Adam opt(3);
  Vector p = Vector::Zero(3);
  opt.descend(p, Eigen::Vector3d(2.0, -7.0, 1e-3));
  EXPECT_NEAR(p[0], -1e-3, 1e-9);
  EXPECT_NEAR(p[1], 1e-3, 1e-9);
  EXPECT_NEAR(p[2], -1e-3, 1e-8);
  Vector q = Vector::Zero(3);
  Adam up(3);
  up.ascend(q, Eigen::Vector3d(2.0, -7.0, 1e-3));
  EXPECT_EQ(q, -p);
}

TEST(AdamOpt, QuadraticBowlConverges) {
  AdamConfig cfg;
  cfg.learning_rate = 1e-2;
  Adam opt(3, cfg);
  const Vector target = Eigen::Vector3d(0.7, -1.3, 2.1);
  const Vector scale = Eigen::Vector3d(1.0, 10.0, 0.1);
  Vector p = Vector::Zero(3);
  for (int k = 0; k < 5000; ++k) opt.descend(p, 2.0 * scale.cwiseProduct(p - target));
  EXPECT_LT((p - target).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(AdamOpt, StateRoundTrip) {
  Adam a(3);
  Vector p = Vector::Zero(3);
  a.descend(p, Eigen::Vector3d(1, 2, 3));
  Adam b(3);
  b.set_state(a.state());
  Vector pa = p, pb = p;
  a.descend(pa, Eigen::Vector3d(-1, 0.5, 2));
  b.descend(pb, Eigen::Vector3d(-1, 0.5, 2));
  EXPECT_EQ(pa, pb);
}

}  // namespace
}  // namespace hover::nn
