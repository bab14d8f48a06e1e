#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "benim/autodiff.hpp"
#include "benim/mlp.hpp"
#include "benim/optim.hpp"

using namespace benim;

namespace {

std::vector<double> finite_difference(const std::function<double(std::span<const double>)>& f,
                                      std::vector<double> x, double h = 1e-6) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double x0 = x[i];
    x[i] = x0 + h;
    const double fp = f(x);
    x[i] = x0 - h;
    const double fm = f(x);
    x[i] = x0;
    g[i] = (fp - fm) / (2 * h);
  }
  return g;
}

}  // namespace

TEST(Tape, ElementaryDerivatives) {
  ad::Tape t;
  auto x = t.variable(0.7), y = t.variable(-1.3);
  auto f = ad::exp(x) * y + ad::log(x) / y - ad::tanh(x * y) + ad::square(y) +
           ad::softplus(y) + ad::abs(y) + ad::relu(x);
  t.backward(f);
  const double xv = 0.7, yv = -1.3;
  const double sech2 = 1 - std::pow(std::tanh(xv * yv), 2);
  const double dx = std::exp(xv) * yv + 1 / (xv * yv) - sech2 * yv + 1;
  const double dy = std::exp(xv) - std::log(xv) / (yv * yv) - sech2 * xv + 2 * yv +
                    1 / (1 + std::exp(-yv)) - 1;
  EXPECT_NEAR(t.adjoint(x), dx, 1e-12);
  EXPECT_NEAR(t.adjoint(y), dy, 1e-12);
}

TEST(Tape, ReusedNodeAccumulates) {
  ad::Tape t;
  auto x = t.variable(3.0);
  auto f = x * x * x;
  t.backward(f);
  EXPECT_DOUBLE_EQ(f.value(), 27.0);
  EXPECT_DOUBLE_EQ(t.adjoint(x), 27.0);
}

TEST(Tape, CustomOpChainsWithOrdinaryNodes) {
  ad::Tape t;
  auto a = t.variable(2.0), b = t.variable(5.0);
  std::vector<ad::Var> in{a, b};
  // outputs (a*b, a+b)
  const double vals[] = {10.0, 7.0};
  auto out = t.custom(in, vals, [](std::span<const double> oa, std::span<double> ia) {
    ia[0] += oa[0] * 5.0 + oa[1];
    ia[1] += oa[0] * 2.0 + oa[1];
  });
  auto f = out[0] * out[1] + a;
  t.backward(f);
  // f = ab(a+b) + a; df/da = b(a+b) + ab + 1 = 35 + 10 + 1
  EXPECT_DOUBLE_EQ(t.adjoint(a), 46.0);
  EXPECT_DOUBLE_EQ(t.adjoint(b), 2.0 * 7.0 + 10.0);
}

TEST(Tape, MixingTapesThrows) {
  ad::Tape t1, t2;
  auto x = t1.variable(1.0), y = t2.variable(1.0);
  EXPECT_THROW(x + y, std::invalid_argument);
}

TEST(MLP, ForwardMatchesHandComputation) {
  MLPConfig cfg;
  cfg.hidden_layers = {2};
  cfg.activation = Activation::tanh;
  // layer 1: w = (0.5, -1.0), b = (0.1, 0.2); layer 2: w = (2.0, 3.0), b = -0.5
  std::vector<double> p{0.5, -1.0, 0.1, 0.2, 2.0, 3.0, -0.5};
  ASSERT_EQ(cfg.parameter_count(), p.size());
  const double x = 0.8;
  const double oracle = 2.0 * std::tanh(0.5 * x + 0.1) + 3.0 * std::tanh(-x + 0.2) - 0.5;
  EXPECT_NEAR(mlp_forward(cfg, p, x), oracle, 1e-15);
  cfg.output_transform = OutputTransform::abs;
  EXPECT_NEAR(mlp_forward(cfg, p, x), std::abs(oracle), 1e-15);
  cfg.output_transform = OutputTransform::softplus;
  EXPECT_NEAR(mlp_forward(cfg, p, x), std::log1p(std::exp(oracle)), 1e-15);
}

TEST(MLP, ParameterCount) {
  MLPConfig cfg;
  cfg.hidden_layers = {16, 16};
  EXPECT_EQ(cfg.parameter_count(), (16u + 16u) + (16u * 16u + 16u) + (16u + 1u));
  cfg.hidden_layers = {};
  EXPECT_EQ(cfg.parameter_count(), 2u);
}

TEST(MLP, NonFiniteInputThrows) {
  MLPConfig cfg;
  std::vector<double> p(cfg.parameter_count(), 0.1);
  EXPECT_THROW(mlp_forward(cfg, p, std::nan("")), std::invalid_argument);
}

TEST(MLP, GradientMatchesFiniteDifferences) {
  for (Activation act : {Activation::tanh, Activation::softplus}) {
    MLPConfig cfg;
    cfg.hidden_layers = {4, 3};
    cfg.activation = act;
    cfg.seed = 9;
    ImportanceNetwork net(3, cfg);
    const std::vector<double> z{0.3, -1.2, 2.0};
    auto loss = [&](ad::Tape& tape, std::span<const ad::Var> w) {
      auto h = net.evaluate(tape, w, z);
      return ad::square(h[0]) + h[1] * h[2];
    };
    auto vg = grad_loss(loss, net.params());
    auto plain = [&](std::span<const double> w) {
      ImportanceNetwork n2(3, cfg, std::vector<double>(w.begin(), w.end()));
      auto h = n2.evaluate(z);
      return h[0] * h[0] + h[1] * h[2];
    };
    EXPECT_NEAR(vg.value, plain(net.params()), 1e-14);
    auto fd = finite_difference(plain, net.params());
    for (std::size_t i = 0; i < fd.size(); ++i) EXPECT_NEAR(vg.gradient[i], fd[i], 1e-7);
  }
}

TEST(MLP, SubnetsAreIndependent) {
  MLPConfig cfg;
  cfg.seed = 4;
  ImportanceNetwork net(3, cfg);
  const std::vector<double> z{0.1, 0.2, 0.3};
  auto vg = grad_loss(
      [&](ad::Tape& tape, std::span<const ad::Var> w) { return net.evaluate(tape, w, z)[1]; },
      net.params());
  const std::size_t k = net.params_per_subnet();
  for (std::size_t i = 0; i < vg.gradient.size(); ++i)
    if (i < k || i >= 2 * k) EXPECT_EQ(vg.gradient[i], 0.0);

  // Perturbing subnet 0 leaves the other outputs untouched.
  auto before = net.evaluate(z);
  net.params()[0] += 1.0;
  auto after = net.evaluate(z);
  EXPECT_NE(before[0], after[0]);
  EXPECT_EQ(before[1], after[1]);
  EXPECT_EQ(before[2], after[2]);
}

TEST(MLP, SeededInitialization) {
  MLPConfig cfg;
  cfg.seed = 11;
  ImportanceNetwork a(2, cfg), b(2, cfg);
  EXPECT_EQ(a.params(), b.params());
  for (double p : a.params()) EXPECT_LE(std::abs(p), cfg.init_scale);
  cfg.seed = 12;
  EXPECT_NE(ImportanceNetwork(2, cfg).params(), a.params());
  EXPECT_THROW(ImportanceNetwork(2, cfg, std::vector<double>(3)), std::invalid_argument);
}

TEST(Optimizer, SgdStep) {
  OptimizerState s(OptimizerMethod::sgd, 0.1);
  std::vector<double> p{1.0, -2.0};
  const std::vector<double> g{0.5, -1.0};
  optimizer_step(s, p, g);
  EXPECT_DOUBLE_EQ(p[0], 0.95);
  EXPECT_DOUBLE_EQ(p[1], -1.9);
}

TEST(Optimizer, AdamFirstStepMovesByLearningRate) {
  OptimizerState s(OptimizerMethod::adam, 0.01);
  std::vector<double> p{1.0, 1.0};
  const std::vector<double> g{3.0, -0.2};
  optimizer_step(s, p, g);
  // Bias-corrected m/sqrt(v) equals sign(g) on the first step.
  EXPECT_NEAR(p[0], 0.99, 1e-9);
  EXPECT_NEAR(p[1], 1.01, 1e-9);
}

TEST(Optimizer, AdamSecondStepOracle) {
  OptimizerState s(OptimizerMethod::adam, 0.1);
  std::vector<double> p{0.0};
  const double g1 = 1.0, g2 = -2.0;
  optimizer_step(s, p, std::vector<double>{g1});
  optimizer_step(s, p, std::vector<double>{g2});
  double m = 0.1 * g1, v = 0.001 * g1 * g1;
  double x = -0.1 * (m / 0.1) / (std::sqrt(v / 0.001) + 1e-8);
  m = 0.9 * m + 0.1 * g2;
  v = 0.999 * v + 0.001 * g2 * g2;
  x -= 0.1 * (m / (1 - 0.81)) / (std::sqrt(v / (1 - 0.999 * 0.999)) + 1e-8);
  EXPECT_NEAR(p[0], x, 1e-12);
}

TEST(Optimizer, MinimizesQuadratic) {
  OptimizerState s(OptimizerMethod::adam, 0.05);
  std::vector<double> p{3.0, -4.0};
  for (int i = 0; i < 2000; ++i) {
    std::vector<double> g{2 * (p[0] - 1), 2 * (p[1] + 2)};
    optimizer_step(s, p, g);
  }
  EXPECT_NEAR(p[0], 1.0, 1e-3);
  EXPECT_NEAR(p[1], -2.0, 1e-3);
}

TEST(Optimizer, NonFiniteGradientNamesCoordinate) {
  OptimizerState s(OptimizerMethod::sgd, 0.1);
  std::vector<double> p{0.0, 0.0};
  try {
    optimizer_step(s, p, std::vector<double>{0.0, INFINITY});
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("coordinate 1"), std::string::npos);
  }
  EXPECT_EQ(p, (std::vector<double>{0.0, 0.0}));
  EXPECT_THROW(OptimizerState(OptimizerMethod::adam, 0.0), std::invalid_argument);
}
