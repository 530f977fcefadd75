#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "gf/error.hpp"
#include "gf/probe.hpp"
#include "gf/proxies.hpp"
#include "gf/registry.hpp"

using namespace gf;

namespace {

Network cell(const char* spec, std::uint64_t seed, std::size_t res = 8) {
  return Network::instantiate(parse_spec(spec), seed, res);
}

double chi_mean(double d) { return std::sqrt(2.0) * std::exp(std::lgamma((d + 1) / 2) - std::lgamma(d / 2)); }

}  // namespace

TEST_CASE("naswot on hand-built codes") {
  const std::vector<std::vector<bool>> differ = {{true, false, true, false}, {false, true, false, true}};
  CHECK(naswot_from_codes(differ) == doctest::Approx(2.0 * std::log(4.0)).epsilon(1e-12));
  const std::vector<std::vector<bool>> same = {{true, false, true, true}, {true, false, true, true}};
  CHECK(naswot_from_codes(same) == kSentinel);
}

TEST_CASE("naswot ignores sample order") {
  const Network net = cell("tss|conv3x3,conv1x1,skip,conv3x3,avgpool3x3,conv1x1", 3);
  const Tensor batch = gaussian_batch(net, 6, 4);
  Tensor flipped(batch.shape());
  const std::size_t per = batch.numel() / 6;
  const std::size_t order[6] = {3, 0, 5, 1, 4, 2};
  for (std::size_t s = 0; s < 6; ++s)
    std::copy_n(batch.data().begin() + static_cast<long>(order[s] * per), per,
                flipped.data().begin() + static_cast<long>(s * per));
  CHECK(naswot(net, batch).value == doctest::Approx(naswot(net, flipped).value).epsilon(1e-12));
  CHECK_THROWS_AS(naswot(net, gaussian_batch(net, 1, 4)), ContractError);
}

TEST_CASE("synflow on a single linear layer") {
  Network net = Network::mlp({{2, 1}, false, false}, 0);
  net.layers()[0].weight = Tensor({2, 1}, {2.0, -3.0});
  CHECK(synflow(net).value == doctest::Approx(5.0));
  net.layers()[0].weight = Tensor({2, 1}, {0.0, 0.0});
  CHECK(synflow(net).value == 0.0);
}

TEST_CASE("synflow leaves weights untouched and does not depend on data") {
  const Network net = cell("tss|conv3x3,skip,conv1x1,avgpool3x3,none,conv3x3", 5);
  std::vector<Tensor> before;
  for (const auto& l : net.layers()) before.push_back(l.weight);
  const double a = synflow(net).value;
  for (std::size_t i = 0; i < before.size(); ++i) CHECK(net.layers()[i].weight == before[i]);
  CHECK(a == synflow(net).value);
  CHECK(a > 0.0);
}

TEST_CASE("gradnorm") {
  ProbeRecord one;
  one.layers.resize(1);
  one.layers[0].values[static_cast<std::size_t>(Stat::PassGrad)] = Tensor({1, 2}, {3.0, 4.0});
  CHECK(gradnorm(one).value == doctest::Approx(5.0));

  ProbeRecord zero;
  zero.layers.resize(2);
  for (auto& l : zero.layers) l.values[static_cast<std::size_t>(Stat::PassGrad)] = Tensor({3, 3});
  CHECK(gradnorm(zero).value == 0.0);

  const Network net = cell("tss|conv3x3,conv1x1,skip,conv3x3,avgpool3x3,conv1x1", 2);
  const ProbeRecord rec = run_probes(net, gaussian_batch(net, 4, 1), {});
  double tally = 0.0;
  for (const auto& l : rec.layers) {
    double s = 0.0;
    for (double g : l.get(Stat::PassGrad).data()) s += g * g;
    tally += std::sqrt(s);
  }
  CHECK(gradnorm(rec).value == doctest::Approx(tally).epsilon(1e-12));
}

TEST_CASE("zen score of an identity map") {
  const Shape shape = {3, 16, 16};
  FeatureMap identity = [](const Tensor& x) { return x; };
  const double eps = 0.01;
  const double expect = std::log(eps * chi_mean(768.0));
  const double got = zen_score(identity, shape, 4, {eps, 8});
  CHECK(std::fabs(got - expect) < 0.05);
  CHECK(got == zen_score(identity, shape, 4, {eps, 8}));

  FeatureMap constant = [](const Tensor& x) { return Tensor({x.dim(0), 2}, 1.0); };
  CHECK(zen_score(constant, shape, 4) == kSentinel);
}

TEST_CASE("zen score rarely drops when every sss width doubles") {
  const std::size_t halves[] = {8, 16, 24, 32};
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<std::size_t> pick(0, 3);
  int ok = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    SizeSpec narrow, wide;
    for (std::size_t p = 0; p < 5; ++p) {
      narrow.widths[p] = halves[pick(rng)];
      wide.widths[p] = 2 * narrow.widths[p];
    }
    const double a = zen_score(Network::instantiate(narrow, seed, 8), seed).value;
    const double b = zen_score(Network::instantiate(wide, seed, 8), seed).value;
    ok += b >= a;
  }
  CHECK(ok >= 45);
}

TEST_CASE("zico matches a direct per-parameter computation") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n;
  std::vector<std::vector<Tensor>> g(2);
  for (auto& batch : g) {
    batch.push_back(Tensor({2, 3}));
    batch.push_back(Tensor({4}));
    for (auto& t : batch)
      for (double& v : t.data()) v = n(rng);
  }
  double expect = 0.0;
  for (std::size_t l = 0; l < 2; ++l) {
    double s = 0.0;
    for (std::size_t i = 0; i < g[0][l].numel(); ++i) {
      const double a = g[0][l][i], b = g[1][l][i];
      const double mean = (a + b) / 2.0;
      const double sd = std::fabs(a - b) / 2.0;
      s += std::fabs(mean) / (sd + 1e-12);
    }
    expect += std::log(s);
  }
  CHECK(zico_from_gradients(g) == doctest::Approx(expect).epsilon(1e-12));

  const std::vector<std::vector<Tensor>> same = {g[0], g[0]};
  CHECK(std::isfinite(zico_from_gradients(same)));
  CHECK(zico_from_gradients(same) != kSentinel);
  CHECK_THROWS_AS(zico_from_gradients({g[0]}), ContractError);

  const Network net = cell("tss|conv3x3,skip,conv1x1,avgpool3x3,none,conv3x3", 1);
  CHECK_THROWS_AS(zico(net, 0, 1), ContractError);
  CHECK(zico(net, 3).value == zico(net, 3).value);
}

TEST_CASE("tenas ingredients") {
  const Network linear = Network::mlp({{5, 8, 3}, false, true}, 1);
  CHECK(tenas(linear, 2).linear_regions == 1.0);

  const Network net = cell("tss|conv3x3,conv1x1,skip,conv3x3,avgpool3x3,conv1x1", 4);
  const linalg::Matrix k = ntk_matrix(net, gaussian_batch(net, 8, 9));
  Eigen::MatrixXd e(8, 8);
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t j = 0; j < 8; ++j) {
      CHECK(k(i, j) == k(j, i));
      e(static_cast<int>(i), static_cast<int>(j)) = k(i, j);
    }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(e);
  CHECK(es.eigenvalues()(0) >= -1e-8);
  const double oracle = es.eigenvalues()(7) / es.eigenvalues()(0);
  CHECK(std::fabs(condition_number(k) - oracle) / oracle < 1e-6);

  const TenasComponents c = tenas(net, 3);
  CHECK(c.linear_regions >= 1.0);
  CHECK(c.linear_regions <= 32.0);
  CHECK(c.standalone == doctest::Approx(c.linear_regions - std::log(c.condition_number)));
}

TEST_CASE("tenas rank sum") {
  std::vector<TenasComponents> pop(3);
  pop[0].condition_number = 10.0;
  pop[0].linear_regions = 5;
  pop[1].condition_number = 100.0;
  pop[1].linear_regions = 7;
  pop[2].condition_number = 1.0;
  pop[2].linear_regions = 5;
  const auto s = tenas_rank_sum(pop);
  CHECK(s[0] == 2.0 + 1.5);
  CHECK(s[1] == 1.0 + 3.0);
  CHECK(s[2] == 3.0 + 1.5);
}

TEST_CASE("eigen entropy and rademacher vectors") {
  linalg::Matrix id(6, 6);
  for (std::size_t i = 0; i < 6; ++i) id(i, i) = 1.0;
  CHECK(eigen_entropy(id) == doctest::Approx(std::log(6.0)).epsilon(1e-12));
  linalg::Matrix rank1(3, 3, 1.0);
  CHECK(eigen_entropy(rank1) == doctest::Approx(0.0).scale(1.0));

  const Tensor r = rademacher({4, 5, 6}, 3);
  int plus = 0;
  for (double v : r.data()) {
    CHECK((v == 1.0 || v == -1.0));
    plus += v > 0;
  }
  CHECK(plus > 30);
  CHECK(plus < 90);
}

TEST_CASE("channel covariance of independent channels") {
  Tensor f({2, 2, 1, 2}, {1.0, -1.0, 2.0, 2.0, -1.0, 1.0, -2.0, -2.0});
  const auto c = channel_covariance(f);
  CHECK(c(0, 0) == doctest::Approx(1.0));
  CHECK(c(1, 1) == doctest::Approx(4.0));
  CHECK(c(0, 1) == doctest::Approx(0.0));
}

TEST_CASE("aznas components") {
  const Network net = cell("tss|conv3x3,conv1x1,skip,conv3x3,avgpool3x3,conv1x1", 4);
  const AzComponents az = aznas_components(net, gaussian_batch(net, 8, 1), 2);
  CHECK(az.progressivity_defined);
  CHECK(std::isfinite(az.expressivity));
  CHECK(az.trainability <= 0.0);
  CHECK(az.flops == static_cast<double>(count_flops(net, net.sample_shape())));

  const Network single = Network::mlp({{4, 3}}, 1);
  const AzComponents one = aznas_components(single, gaussian_batch(single, 8, 1), 2);
  CHECK_FALSE(one.progressivity_defined);
  CHECK(one.progressivity == 0.0);
}

TEST_CASE("aznas aggregate") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n;
  std::vector<AzComponents> pop(7);
  for (auto& c : pop) c = {n(rng), n(rng), true, n(rng), std::exp(n(rng))};
  pop[2] = {10, 10, true, 10, 1e9};
  pop[5] = {-10, -10, true, -10, 1e-9};
  const auto agg = aznas_aggregate(pop);
  CHECK(agg[2] == 0.0);
  CHECK(agg[5] == doctest::Approx(4.0 * std::log(1.0 / 7.0)));
  for (double v : agg) CHECK(v <= 0.0);

  // Strictly monotone transforms of one column leave the aggregate unchanged.
  auto moved = pop;
  for (auto& c : moved) {
    c.expressivity = std::exp(3.0 * c.expressivity);
    c.flops = std::log(c.flops) * 2.0 - 7.0;
  }
  CHECK(aznas_aggregate(moved) == agg);

  CHECK_THROWS_AS(aznas_aggregate({pop[0]}), ContractError);
}

TEST_CASE("eznas delegates to the registered program") {
  FormulaRegistry reg = FormulaRegistry::parse("eznas = frobenius_norm(pass_grad)\n");
  const Network net = cell("tss|conv3x3,conv1x1,skip,conv3x3,avgpool3x3,conv1x1", 2);
  const ProbeRecord rec = run_probes(net, gaussian_batch(net, 4, 1), {});
  CHECK(eznas(rec, reg).value == doctest::Approx(gradnorm(rec).value).epsilon(1e-12));
  CHECK(eznas(rec, reg).value == eznas(rec, reg).value);

  const FormulaRegistry empty = FormulaRegistry::parse("gm_x = sum(pass_wt)\n");
  CHECK_THROWS_AS(eznas(rec, empty), ConfigError);
}

TEST_CASE("sanitize and average ranks") {
  CHECK(sanitize(std::nan("")) == kSentinel);
  CHECK(sanitize(-INFINITY) == kSentinel);
  CHECK(sanitize(2.5) == 2.5);
  CHECK(average_ranks({3.0, 1.0, 3.0, 2.0}) == std::vector<double>{3.5, 1.0, 3.5, 2.0});
}

TEST_CASE("every proxy is deterministic on a fixed network") {
  const Network net = cell("sss|16,8,24,8,16", 6);
  const Tensor batch = gaussian_batch(net, 8, 2);
  CHECK(naswot(net, batch).value == naswot(net, batch).value);
  CHECK(zen_score(net, 1).value == zen_score(net, 1).value);
  const TenasComponents a = tenas(net, 1), b = tenas(net, 1);
  CHECK(a.condition_number == b.condition_number);
  const AzComponents x = aznas_components(net, batch, 1), y = aznas_components(net, batch, 1);
  CHECK(x.trainability == y.trainability);
  CHECK(x.expressivity == y.expressivity);
}
