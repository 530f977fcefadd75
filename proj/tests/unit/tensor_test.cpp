#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "gf/error.hpp"
#include "gf/tensor.hpp"
#include "support/grad_cases.hpp"

using namespace gf;

namespace {

std::vector<double> values_of(const Var& v) { return v.value().values(); }

}  // namespace

TEST_CASE("relu, frobenius_norm and softmax on small inputs") {
  Tape t;
  CHECK(values_of(ops::relu(t.constant(Tensor({3}, {-1.0, 0.0, 2.0})))) == std::vector<double>{0.0, 0.0, 2.0});
  CHECK(ops::frobenius_norm(t.constant(Tensor({1, 2}, {3.0, 4.0}))).value().item() == doctest::Approx(5.0));
  const auto sm = values_of(ops::softmax(t.constant(Tensor({2}, {0.0, 0.0}))));
  CHECK(sm[0] == doctest::Approx(0.5));
  CHECK(sm[1] == doctest::Approx(0.5));
}

TEST_CASE("backward of sum of squares") {
  Tape t;
  Var x = t.leaf(Tensor({2}, {1.0, 2.0}), true);
  t.backward(ops::sum(ops::square(x)));
  CHECK(x.grad().values() == std::vector<double>{2.0, 4.0});
}

TEST_CASE("relu subgradient at zero is zero") {
  Tape t;
  Var w = t.leaf(Tensor({1, 2}, {1.0, -1.0}), true);
  Var x = t.constant(Tensor({2, 1}, {1.0, 1.0}));
  t.backward(ops::sum(ops::relu(ops::matmul(w, x))));
  CHECK(w.grad().values() == std::vector<double>{0.0, 0.0});

  // Nudged off the kink the gradient is the input.
  Tape t2;
  Var w2 = t2.leaf(Tensor({1, 2}, {1.0, -0.5}), true);
  t2.backward(ops::sum(ops::relu(ops::matmul(w2, t2.constant(Tensor({2, 1}, {1.0, 1.0}))))));
  CHECK(w2.grad().values() == std::vector<double>{1.0, 1.0});
}

TEST_CASE("backward rejects non-scalar outputs") {
  Tape t;
  Var x = t.leaf(Tensor({2}, {1.0, 2.0}), true);
  CHECK_THROWS_AS(t.backward(ops::square(x)), ContractError);
}

TEST_CASE("gradient_check basics") {
  SUBCASE("quadratic form") {
    const Tensor a = testing::seeded_tensor({3, 3}, 99);
    ScalarFn quad = [a](Tape& t, Var x) {
      Var xm = ops::reshape(x, {3, 1});
      return ops::sum(ops::multiply(ops::transpose(xm), ops::transpose(ops::matmul(t.constant(a), xm))));
    };
    CHECK(gradient_check(quad, Tensor({3}, {0.3, -1.2, 0.7}), 1e-5) < 1e-6);
  }
  SUBCASE("constant function") {
    ScalarFn constant = [](Tape& t, Var) { return t.constant(Tensor::scalar(4.0)); };
    CHECK(gradient_check(constant, Tensor({2}, {1.0, 2.0})) == 0.0);
  }
  SUBCASE("relu network away from kinks") {
    const Tensor w1 = testing::seeded_tensor({4, 3}, 1);
    const Tensor w2 = testing::seeded_tensor({3, 1}, 2);
    ScalarFn net = [&](Tape& t, Var x) {
      return ops::sum(ops::matmul(ops::relu(ops::matmul(x, t.constant(w1))), t.constant(w2)));
    };
    std::mt19937_64 rng(5);
    int checked = 0;
    while (checked < 20) {
      const Tensor p = testing::seeded_tensor({2, 4}, rng());
      Tape t;
      Var pre = ops::matmul(t.constant(p), t.constant(w1));
      if (!testing::all_abs_above(pre.value(), 1e-3)) continue;
      CHECK(gradient_check(net, p) < 1e-4);
      ++checked;
    }
  }
  SUBCASE("contract errors") {
    ScalarFn vec = [](Tape&, Var x) { return ops::square(x); };
    CHECK_THROWS_AS(gradient_check(vec, Tensor({2}, {1.0, 2.0})), ContractError);
    ScalarFn ok = [](Tape&, Var x) { return ops::sum(x); };
    CHECK_THROWS_AS(gradient_check(ok, Tensor({2}, {1.0, 2.0}), 0.0), ContractError);
  }
}

TEST_CASE("every differentiable primitive matches central differences") {
  for (const auto& r : testing::run_grad_cases(100, 2024)) {
    INFO(r.primitive);
    CHECK(r.worst < 1e-4);
  }
}

TEST_CASE("softmax rows sum to one and permute with their input") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const Tensor x = testing::seeded_tensor({4, 7}, rng(), -20.0, 20.0);
    Tape t;
    const Tensor y = ops::softmax(t.constant(x)).value();
    for (std::size_t r = 0; r < 4; ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < 7; ++c) s += y[r * 7 + c];
      CHECK(std::fabs(s - 1.0) <= 1e-12);
    }
    std::vector<std::size_t> perm(7);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Tensor xp({4, 7});
    for (std::size_t r = 0; r < 4; ++r)
      for (std::size_t c = 0; c < 7; ++c) xp[r * 7 + c] = x[r * 7 + perm[c]];
    const Tensor yp = ops::softmax(t.constant(xp)).value();
    for (std::size_t r = 0; r < 4; ++r)
      for (std::size_t c = 0; c < 7; ++c) CHECK(yp[r * 7 + c] == doctest::Approx(y[r * 7 + perm[c]]).epsilon(1e-14));
  }
}

TEST_CASE("repeated backward sweeps are bit-identical") {
  Tape t;
  Var x = t.leaf(testing::seeded_tensor({2, 2, 5, 5}, 8), true);
  Var w = t.leaf(testing::seeded_tensor({3, 2, 3, 3}, 9), true);
  Var y = ops::cross_entropy(ops::global_avg_pool(ops::relu(ops::conv2d(x, w))), {0, 2});
  t.backward(y);
  const Tensor gx = x.grad();
  const Tensor gw = w.grad();
  t.backward(y);
  CHECK(x.grad() == gx);
  CHECK(w.grad() == gw);
}

TEST_CASE("tape records inputs before their consumers") {
  Tape t;
  Var a = t.leaf(Tensor({2}, {1.0, 2.0}), true);
  Var b = ops::square(ops::add(a, a));
  ops::sum(ops::multiply(b, a));
  for (std::size_t id = 0; id < t.size(); ++id)
    for (std::size_t in : t.inputs(id)) CHECK(in < id);
}

TEST_CASE("shape errors name the primitive") {
  Tape t;
  Var a = t.constant(Tensor({2, 3}));
  Var b = t.constant(Tensor({2, 2}));
  try {
    ops::matmul(a, b);
    FAIL("expected a shape error");
  } catch (const ShapeError& e) {
    CHECK(e.primitive() == "matmul");
  }
  CHECK_THROWS_AS(ops::add(a, b), ShapeError);
  CHECK_THROWS_AS(ops::conv2d(t.constant(Tensor({1, 1, 2, 2})), t.constant(Tensor({1, 2, 3, 3}))), ShapeError);
  CHECK_THROWS_AS(ops::cross_entropy(a, {0, 3}), ShapeError);
}

TEST_CASE("conv2d agrees with a direct convolution") {
  const Tensor x = testing::seeded_tensor({2, 3, 5, 4}, 1);
  const Tensor w = testing::seeded_tensor({2, 3, 3, 3}, 2);
  Tape t;
  const Tensor y = ops::conv2d(t.constant(x), t.constant(w)).value();
  REQUIRE(y.shape() == Shape{2, 2, 5, 4});
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t o = 0; o < 2; ++o)
      for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 4; ++j) {
          double s = 0.0;
          for (std::size_t c = 0; c < 3; ++c)
            for (int di = -1; di <= 1; ++di)
              for (int dj = -1; dj <= 1; ++dj) {
                const int ii = i + di, jj = j + dj;
                if (ii < 0 || ii >= 5 || jj < 0 || jj >= 4) continue;
                s += x[((n * 3 + c) * 5 + ii) * 4 + jj] * w[((o * 3 + c) * 3 + (di + 1)) * 3 + (dj + 1)];
              }
          CHECK(y[((n * 2 + o) * 5 + i) * 4 + j] == doctest::Approx(s).epsilon(1e-12));
        }
}

TEST_CASE("gemm matches a triple loop for every transpose combination") {
  const std::size_t m = 5, n = 4, k = 3;
  const Tensor a = testing::seeded_tensor({m * k}, 1);
  const Tensor b = testing::seeded_tensor({k * n}, 2);
  for (bool ta : {false, true})
    for (bool tb : {false, true}) {
      std::vector<double> c(m * n, 1.0);
      gemm(ta, tb, m, n, k, a.data().data(), b.data().data(), c.data(), true);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          double s = 1.0;
          for (std::size_t p = 0; p < k; ++p) s += (ta ? a[p * m + i] : a[i * k + p]) * (tb ? b[j * k + p] : b[p * n + j]);
          CHECK(c[i * n + j] == doctest::Approx(s).epsilon(1e-13));
        }
    }
}
