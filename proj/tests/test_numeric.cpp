#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>

#include "structgen/autograd.hpp"
#include "structgen/errors.hpp"
#include "structgen/gradcheck.hpp"
#include "structgen/kernels.hpp"
#include "test_util.hpp"

using namespace structgen;
using testutil::random_tensor;

namespace {

// Central differences of a scalar function of one tensor.
std::vector<double> numeric_grad(Tensor& x, const std::function<double()>& f, double h = 1e-5) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = f();
    x[i] = keep - h;
    const double down = f();
    x[i] = keep;
    g[i] = (up - down) / (2 * h);
  }
  return g;
}

double rel(double a, double b) { return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), 1e-8}); }

}  // namespace

TEST(Tensor, ShapeAndFactories) {
  Tensor m = Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(m.rows(), 2u);
  EXPECT_EQ(m.cols(), 3u);
  EXPECT_EQ(m.at(1, 2), 6.0);
  EXPECT_EQ(Tensor::scalar(2.5).item(), 2.5);
  EXPECT_THROW(Tensor(Shape{2, 2}, {1, 2, 3}), ShapeError);
  EXPECT_FALSE(m.has_grad());
  m.ensure_grad();
  EXPECT_EQ(m.grad().size(), m.size());
  m.values()[0] = NAN;
  EXPECT_FALSE(m.all_finite());
}

TEST(Matmul, IdentityAndHandArithmetic) {
  ad::Tape tape;
  auto I = tape.constant(Tensor::matrix(2, 2, {1, 0, 0, 1}));
  auto b = tape.constant(Tensor::matrix(2, 1, {3, 4}));
  auto out = ad::matmul(I, b);
  EXPECT_EQ(out.shape(), (Shape{2, 1}));
  EXPECT_EQ(out[0], 3.0);
  EXPECT_EQ(out[1], 4.0);

  auto r = ad::matmul(tape.constant(Tensor::matrix(1, 2, {1, 2})), b);
  EXPECT_EQ(r.shape(), (Shape{1, 1}));
  EXPECT_EQ(r[0], 11.0);
}

TEST(Matmul, ShapeErrorNamesBothShapes) {
  ad::Tape tape;
  auto a = tape.constant(Tensor(Shape{4, 3}));
  auto b = tape.constant(Tensor(Shape{2, 2}));
  try {
    ad::matmul(a, b);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[4x3]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[2x2]"), std::string::npos) << msg;
  }
}

TEST(Matmul, GradientMatchesFiniteDifferences) {
  Rng rng(3);
  Tensor A = random_tensor({4, 3}, rng);
  Tensor B = random_tensor({3, 2}, rng);
  auto loss = [&](ad::Tape& t) { return ad::sum(ad::matmul(t.param(A), t.param(B))); };
  {
    ad::Tape tape;
    tape.backward(loss(tape));
  }
  auto f = [&] {
    ad::Tape t(ad::Tape::Mode::kNoGrad);
    return ad::sum(ad::matmul(t.frozen(A), t.frozen(B))).item();
  };
  const std::vector<double> ga(A.grad().begin(), A.grad().end());
  const auto na = numeric_grad(A, f);
  for (std::size_t i = 0; i < ga.size(); ++i) EXPECT_LT(rel(ga[i], na[i]), 1e-6) << i;
  const std::vector<double> gb(B.grad().begin(), B.grad().end());
  const auto nb = numeric_grad(B, f);
  for (std::size_t i = 0; i < gb.size(); ++i) EXPECT_LT(rel(gb[i], nb[i]), 1e-6) << i;
}

TEST(Matmul, LinearLossGradIsOuterProduct) {
  Tensor W = Tensor::matrix(2, 3, {1, -2, 3, 0.5, 4, -1});
  const std::vector<double> x{0.3, -0.7, 2.0};
  ad::Tape tape;
  auto loss = ad::sum(ad::matmul(tape.param(W), tape.constant(Tensor::vector(x))));
  tape.backward(loss);
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(W.grad()[i * 3 + j], x[j]);
  }
}

TEST(Elementwise, BasicValues) {
  ad::Tape tape;
  EXPECT_EQ(ad::sigmoid(tape.constant(Tensor::scalar(0.0))).item(), 0.5);
  EXPECT_EQ(ad::tanh(tape.constant(Tensor::scalar(0.0))).item(), 0.0);
  const auto big = ad::sigmoid(tape.constant(Tensor::vector({30.0, -30.0, 700.0, -700.0})));
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_GE(big[i], 0.0);
    EXPECT_LE(big[i], 1.0);
    EXPECT_TRUE(std::isfinite(big[i]));
  }
  EXPECT_GT(big[0], 0.0);
  EXPECT_LT(big[0], 1.0);
}

TEST(Elementwise, SigmoidSymmetry) {
  Rng rng(11);
  for (int i = 0; i < 1000; ++i) {
    const double x = rng.uniform(-40, 40);
    EXPECT_NEAR(ad::sigmoid_value(x) + ad::sigmoid_value(-x), 1.0, 1e-12);
  }
}

TEST(Elementwise, ShapeMismatchThrows) {
  ad::Tape tape;
  auto a = tape.constant(Tensor(Shape{3}));
  auto b = tape.constant(Tensor(Shape{4}));
  EXPECT_THROW(ad::add(a, b), ShapeError);
  EXPECT_THROW(ad::mul(a, b), ShapeError);
  EXPECT_THROW(ad::sub(a, b), ShapeError);
  EXPECT_THROW(ad::dot(a, b), ShapeError);
  auto m = tape.constant(Tensor(Shape{2, 3}));
  auto n = tape.constant(Tensor(Shape{3, 3}));
  EXPECT_THROW(ad::concat({m, n}, 1), ShapeError);
  EXPECT_NO_THROW(ad::concat({m, n}, 0));
}

// Every primitive op against central differences at 1e-6.
TEST(Elementwise, PrimitiveGradientsMatchFiniteDifferences) {
  Rng rng(5);
  Tensor a = random_tensor({5}, rng, -3, 3);
  Tensor b = random_tensor({5}, rng, -3, 3);
  Tensor M = random_tensor({2, 5}, rng);
  using Build = std::function<ad::Var(ad::Var, ad::Var, ad::Var)>;
  const std::vector<std::pair<std::string, Build>> cases{
      {"sigmoid", [](auto x, auto, auto) { return ad::sum(ad::mul(ad::sigmoid(x), ad::sigmoid(x))); }},
      {"tanh", [](auto x, auto, auto) { return ad::sum(ad::mul(ad::tanh(x), ad::tanh(x))); }},
      {"mul", [](auto x, auto y, auto) { return ad::sum(ad::mul(ad::mul(x, y), x)); }},
      {"add", [](auto x, auto y, auto) { return ad::dot(ad::add(x, y), ad::sub(x, y)); }},
      {"scale", [](auto x, auto, auto) { return ad::dot(ad::scale(x, -2.5), x); }},
      {"concat", [](auto x, auto y, auto) { return ad::dot(ad::concat({x, y}), ad::concat({y, ad::tanh(x)})); }},
      {"slice", [](auto x, auto, auto) { return ad::dot(ad::slice(x, 1, 3), ad::slice(x, 2, 3)); }},
      {"row", [](auto x, auto, auto m) { return ad::dot(ad::row(m, 1), ad::tanh(x)); }},
      {"stack_rows",
       [](auto x, auto y, auto m) {
         std::vector<ad::Var> rows{x, y};
         return ad::sum(ad::matmul(m, ad::tanh(ad::row(ad::stack_rows(rows), 0))));
       }},
      {"matmul_nt", [](auto x, auto, auto m) {
         std::vector<ad::Var> rows{x, ad::tanh(x)};
         return ad::sum(ad::tanh(ad::matmul_nt(m, ad::stack_rows(rows))));
       }},
      {"softmax", [](auto x, auto y, auto) { return ad::dot(ad::softmax(x), y); }},
      {"log_softmax", [](auto x, auto y, auto) { return ad::dot(ad::log_softmax(x), y); }},
      {"cross_entropy", [](auto x, auto, auto) { return ad::cross_entropy(x, 2); }},
      {"normalized_product",
       [](auto x, auto y, auto) { return ad::dot(ad::normalized_product(ad::softmax(x), ad::softmax(y)), y); }},
      {"add_n", [](auto x, auto y, auto) {
         std::vector<ad::Var> s{ad::sum(ad::mul(x, x)), ad::dot(x, y), ad::sum(y)};
         return ad::add_n(s);
       }},
  };
  for (const auto& [name, build] : cases) {
    const std::vector<NamedTensor> params{{"a", &a}, {"b", &b}, {"M", &M}};
    GradCheckOptions opts;
    opts.tolerance = 1e-6;
    opts.floor = 1e-6;
    const auto report = grad_check(
        [&](ad::Tape& t) {
          const bool g = t.records_grad();
          auto leaf = [&](Tensor& x) { return g ? t.param(x) : t.frozen(x); };
          return build(leaf(a), leaf(b), leaf(M));
        },
        params, opts);
    EXPECT_TRUE(report.passed()) << name << " max rel err " << report.max_rel_error;
  }
}

TEST(Softmax, UniformAndOverflowSafe) {
  ad::Tape tape;
  const auto u = ad::softmax(tape.constant(Tensor::vector({0, 0, 0})));
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(u[i], 1.0 / 3.0, 1e-15);
  const auto big = ad::softmax(tape.constant(Tensor::vector({1000, 1000})));
  EXPECT_EQ(big[0], 0.5);
  EXPECT_EQ(big[1], 0.5);
  EXPECT_THROW(ad::softmax(tape.constant(Tensor(Shape{0}))), std::invalid_argument);
}

TEST(Softmax, MatchesExtendedPrecision) {
  ad::Tape tape;
  const auto s = ad::softmax(tape.constant(Tensor::vector({1, 2, 3})));
  long double z = 0;
  for (int i = 1; i <= 3; ++i) z += std::exp(static_cast<long double>(i));
  for (int i = 1; i <= 3; ++i) {
    EXPECT_NEAR(s[static_cast<std::size_t>(i - 1)], static_cast<double>(std::exp(static_cast<long double>(i)) / z),
                1e-15);
  }
}

TEST(Softmax, AlwaysOnSimplex) {
  Rng rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    const auto x = testutil::random_vector(1 + rng.uniform_index(50), rng, -80, 80);
    const auto p = ad::softmax_values(x);
    double s = 0;
    for (double v : p) {
      EXPECT_GE(v, 0.0);
      s += v;
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(CrossEntropy, KnownValuesAndGradient) {
  ad::Tape tape;
  EXPECT_NEAR(ad::cross_entropy(tape.constant(Tensor::vector({0.7, 0.7, 0.7, 0.7})), 3).item(), std::log(4.0),
              1e-15);
  EXPECT_LT(ad::cross_entropy(tape.constant(Tensor::vector({0, 50, 0, 0})), 1).item(), 1e-10);
  EXPECT_THROW(ad::cross_entropy(tape.constant(Tensor::vector({0, 1})), 2), IndexError);

  Rng rng(4);
  Tensor logits = random_tensor({10}, rng, -3, 3);
  ad::Tape t2;
  auto loss = ad::cross_entropy(t2.param(logits), 6);
  t2.backward(loss);
  const auto p = ad::softmax_values(logits.values());
  for (std::size_t i = 0; i < 10; ++i) EXPECT_NEAR(logits.grad()[i], p[i] - (i == 6 ? 1.0 : 0.0), 1e-10);
}

TEST(Backward, NonScalarLossThrows) {
  ad::Tape tape;
  Tensor x = Tensor::vector({1, 2});
  auto y = ad::tanh(tape.param(x));
  EXPECT_THROW(tape.backward(y), ShapeError);
}

TEST(Backward, DisconnectedParameterGetsNoGradient) {
  Tensor used = Tensor::vector({1, 2});
  Tensor unused = Tensor::vector({3, 4});
  ad::Tape tape;
  auto u = tape.param(used);
  tape.param(unused);
  tape.backward(ad::sum(ad::mul(u, u)));
  for (double g : unused.ensure_grad()) EXPECT_EQ(g, 0.0);
  EXPECT_EQ(used.grad()[1], 4.0);
}

TEST(Backward, VisitsEveryRecordedOpOnce) {
  Tensor x = Tensor::vector({0.1, 0.2, 0.3});
  ad::Tape tape;
  auto v = tape.param(x);
  auto a = ad::tanh(v);
  auto b = ad::sigmoid(v);
  auto c = ad::mul(a, b);
  auto loss = ad::sum(c);
  tape.backward(loss);
  EXPECT_EQ(tape.last_backward_visits(), 4u);
}

TEST(Backward, GradientsAccumulateUntilZeroed) {
  Tensor x = Tensor::vector({2.0});
  for (int i = 0; i < 2; ++i) {
    ad::Tape tape;
    auto v = tape.param(x);
    tape.backward(ad::sum(ad::mul(v, v)));
  }
  EXPECT_EQ(x.grad()[0], 8.0);
  x.zero_grad();
  EXPECT_EQ(x.grad()[0], 0.0);
}

TEST(Backward, ForwardIsDeterministic) {
  Rng rng(1);
  Tensor W = random_tensor({7, 5}, rng);
  Tensor v = random_tensor({5}, rng);
  auto run = [&] {
    ad::Tape tape(ad::Tape::Mode::kNoGrad);
    const auto s = ad::softmax(ad::tanh(ad::matmul(tape.frozen(W), tape.frozen(v)))).value().values();
    return std::vector<double>(s.begin(), s.end());
  };
  const auto first = run();
  const auto b = run();
  for (std::size_t i = 0; i < first.size(); ++i) EXPECT_EQ(first[i], b[i]);
}

TEST(NormalizedProduct, UniformBetaCopiesAlphaAndFallback) {
  ad::Tape tape;
  const auto alpha = tape.constant(Tensor::vector({0.2, 0.5, 0.3}));
  const auto beta = tape.constant(Tensor::vector({1.0 / 3, 1.0 / 3, 1.0 / 3}));
  const auto g = ad::normalized_product(alpha, beta);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(g[i], alpha[i]);

  const auto g2 = ad::normalized_product(tape.constant(Tensor::vector({0.5, 0.5})),
                                         tape.constant(Tensor::vector({0.9, 0.1})));
  EXPECT_NEAR(g2[0], 0.9, 1e-15);
  EXPECT_NEAR(g2[1], 0.1, 1e-15);

  const auto disjoint = ad::normalized_product(tape.constant(Tensor::vector({1, 0})),
                                               tape.constant(Tensor::vector({0, 1})));
  EXPECT_EQ(disjoint[0], 1.0);
  EXPECT_EQ(disjoint[1], 0.0);
}

TEST(GradCheck, LinearModelIsExact) {
  Rng rng(2);
  Tensor W = random_tensor({3, 4}, rng);
  const Tensor x = random_tensor({4}, rng);
  const auto report = grad_check(
      [&](ad::Tape& t) {
        auto w = t.records_grad() ? t.param(W) : t.frozen(W);
        return ad::sum(ad::matmul(w, t.constant(x)));
      },
      {{"W", &W}});
  EXPECT_TRUE(report.passed());
  EXPECT_LT(report.max_rel_error, 1e-10);
}

TEST(GradCheck, CorruptedBackwardRuleIsFlagged) {
  Tensor x = Tensor::vector({0.3, -0.4, 0.5});
  // y = x^2 elementwise with a backward rule that forgets the factor 2.
  auto bad_square = [](ad::Var v) {
    Tensor out(v.shape());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] * v[i];
    return v.tape->record(std::move(out), {v}, [v](ad::Tape& t, std::size_t self) {
      auto go = t.grad(self);
      auto gi = t.grad(v.id);
      for (std::size_t i = 0; i < gi.size(); ++i) gi[i] += go[i] * v[i];
    });
  };
  const auto report = grad_check(
      [&](ad::Tape& t) { return ad::sum(bad_square(t.records_grad() ? t.param(x) : t.frozen(x))); }, {{"x", &x}});
  EXPECT_FALSE(report.passed());
  ASSERT_EQ(report.entries.size(), 1u);
  EXPECT_TRUE(report.entries[0].flagged);
}

TEST(GradCheck, RelativeErrorUsesFloor) {
  EXPECT_EQ(relative_error(1.0, 1.0, 1e-6), 0.0);
  EXPECT_NEAR(relative_error(2.0, 1.0, 1e-6), 0.5, 1e-15);
  EXPECT_NEAR(relative_error(1e-12, 0.0, 1e-6), 1e-6, 1e-18);
}

// ---- kernels ---------------------------------------------------------------

TEST(Gemm, ParallelMatchesReferenceBitForBit) {
  Rng rng(8);
  const std::vector<std::array<std::size_t, 3>> shapes{{1, 1, 1}, {3, 5, 7}, {17, 1, 9}, {64, 64, 64},
                                                       {130, 70, 90}, {1, 300, 40}};
  for (const auto& [m, n, k] : shapes) {
    for (int ta = 0; ta < 2; ++ta) {
      for (int tb = 0; tb < 2; ++tb) {
        for (int acc = 0; acc < 2; ++acc) {
          kernels::GemmArgs args{ta == 1, tb == 1, m, n, k, acc == 1};
          const auto a = testutil::random_vector(m * k, rng);
          const auto b = testutil::random_vector(k * n, rng);
          const auto c0 = testutil::random_vector(m * n, rng);
          auto ref = c0, par = c0;
          kernels::gemm_reference(args, a, b, ref);
          kernels::gemm_parallel(args, a, b, par);
          for (std::size_t i = 0; i < ref.size(); ++i) {
            ASSERT_EQ(ref[i], par[i]) << m << "x" << n << "x" << k << " ta=" << ta << " tb=" << tb;
          }
        }
      }
    }
  }
}

TEST(Gemm, ReferenceHandArithmetic) {
  const std::vector<double> a{1, 2, 3, 4};  // 2x2
  const std::vector<double> b{5, 6, 7, 8};
  std::vector<double> c(4);
  kernels::gemm_reference({false, false, 2, 2, 2, false}, a, b, c);
  EXPECT_EQ(c, (std::vector<double>{19, 22, 43, 50}));
  kernels::gemm_reference({true, false, 2, 2, 2, false}, a, b, c);
  EXPECT_EQ(c, (std::vector<double>{26, 30, 38, 44}));
  kernels::gemm_reference({false, true, 2, 2, 2, true}, a, b, c);
  EXPECT_EQ(c, (std::vector<double>{26 + 17, 30 + 23, 38 + 39, 44 + 53}));
}

TEST(Gemm, ThreadCapFromEnvironment) {
  setenv("STRUCTGEN_THREADS", "1", 1);
  EXPECT_EQ(kernels::configure_threads_from_env(), 1);
  EXPECT_EQ(kernels::max_threads(), 1);
  unsetenv("STRUCTGEN_THREADS");
}
