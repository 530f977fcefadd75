#include "gf/proxies.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_set>

#include "gf/error.hpp"
#include "gf/formula.hpp"
#include "gf/registry.hpp"
#include "gf/rng.hpp"

namespace gf {

double sanitize(double raw) { return std::isfinite(raw) ? raw : kSentinel; }

namespace {

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

Tensor slice_sample(const Tensor& batch, std::size_t i) {
  Shape s = batch.shape();
  const std::size_t per = batch.numel() / s[0];
  s[0] = 1;
  std::vector<double> d(batch.data().begin() + static_cast<long>(i * per),
                        batch.data().begin() + static_cast<long>((i + 1) * per));
  return Tensor(std::move(s), std::move(d));
}

// Per-sample relu on/off pattern, concatenated over all relus in forward order.
std::vector<std::vector<bool>> relu_codes(const ForwardTrace& tr, std::size_t n) {
  std::vector<std::vector<bool>> codes(n);
  for (Var r : tr.relu_inputs) {
    const Tensor& v = r.value();
    const std::size_t per = v.numel() / n;
    for (std::size_t s = 0; s < n; ++s)
      for (std::size_t k = 0; k < per; ++k) codes[s].push_back(v[s * per + k] > 0.0);
  }
  return codes;
}

}  // namespace

std::vector<double> average_ranks(const std::vector<double>& values) {
  const std::size_t n = values.size();
  auto key = [&](std::size_t i) {
    return std::isnan(values[i]) ? -std::numeric_limits<double>::infinity() : values[i];
  };
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return key(a) < key(b); });
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && key(idx[j + 1]) == key(idx[i])) ++j;
    const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}

double naswot_from_codes(const std::vector<std::vector<bool>>& codes) {
  const std::size_t n = codes.size();
  linalg::Matrix k(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) {
      if (codes[i].size() != codes[j].size()) throw ContractError("naswot: code lengths differ");
      std::size_t agree = 0;
      for (std::size_t b = 0; b < codes[i].size(); ++b) agree += codes[i][b] == codes[j][b];
      k(i, j) = k(j, i) = static_cast<double>(agree);
    }
  return sanitize(linalg::slogdet(k).logabsdet);
}

ProxyScore naswot(const Network& net, const Tensor& batch) {
  Stopwatch sw;
  if (batch.rank() == 0 || batch.dim(0) < 2) throw ContractError("naswot: batch needs at least 2 samples");
  Tape tape;
  ForwardOptions fo;
  fo.params_require_grad = false;
  const ForwardTrace tr = net.forward(tape, batch, fo);
  const double v = naswot_from_codes(relu_codes(tr, batch.dim(0)));
  return {"naswot", v, sw.seconds()};
}

ProxyScore synflow(const Network& net) {
  Stopwatch sw;
  Tape tape;
  ForwardOptions fo;
  fo.abs_weights = true;
  const ForwardTrace tr = net.forward(tape, Tensor(net.batch_shape(1), 1.0), fo);
  tape.backward(ops::sum(tr.logits));
  double score = 0.0;
  for (const auto& lt : tr.layers)
    for (Var p : {lt.weight, lt.bias}) {
      if (p.tape == nullptr) continue;
      const Tensor& w = p.value();
      const Tensor& g = tape.grad(p.id);
      for (std::size_t i = 0; i < w.numel(); ++i) score += std::fabs(w[i] * g[i]);
    }
  return {"synflow", sanitize(score), sw.seconds()};
}

ProxyScore gradnorm(const ProbeRecord& record) {
  Stopwatch sw;
  double total = 0.0;
  for (const auto& layer : record.layers) {
    double s = 0.0;
    for (double g : layer.get(Stat::PassGrad).data()) s += g * g;
    total += std::sqrt(s);
  }
  return {"gradnorm", sanitize(total), sw.seconds()};
}

double zen_score(const FeatureMap& f, const Shape& sample_shape, std::uint64_t seed, const ZenOptions& options) {
  if (options.draws < 1) throw ContractError("zen_score: needs at least one draw");
  Rng rng(derive_seed({seed, 0x2e9}));
  std::normal_distribution<double> normal;
  // All draws go through the network as one batch; samples do not interact.
  Shape shape = {static_cast<std::size_t>(options.draws)};
  shape.insert(shape.end(), sample_shape.begin(), sample_shape.end());
  Tensor x(shape), moved(shape);
  for (std::size_t i = 0; i < x.numel(); ++i) {
    x[i] = normal(rng);
    moved[i] = x[i] + options.eps * normal(rng);
  }
  const Tensor a = f(x);
  const Tensor b = f(moved);
  const std::size_t per = a.numel() / static_cast<std::size_t>(options.draws);
  double acc = 0.0;
  for (int d = 0; d < options.draws; ++d) {
    double s = 0.0;
    for (std::size_t i = d * per; i < (d + 1) * per; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    acc += std::sqrt(s);
  }
  return sanitize(std::log(acc / options.draws));
}

ProxyScore zen_score(const Network& net, std::uint64_t seed, const ZenOptions& options) {
  Stopwatch sw;
  FeatureMap features = [&net](const Tensor& x) {
    Tape tape;
    ForwardOptions fo;
    fo.params_require_grad = false;
    return net.forward(tape, x, fo).features.value();
  };
  const double v = zen_score(features, net.sample_shape(), seed, options);
  return {"zennas", v, sw.seconds()};
}

double zico_from_gradients(const std::vector<std::vector<Tensor>>& g) {
  if (g.size() < 2) throw ContractError("zico: needs at least 2 batches (gradient std is undefined for one)");
  const double nb = static_cast<double>(g.size());
  double total = 0.0;
  for (std::size_t l = 0; l < g[0].size(); ++l) {
    double layer = 0.0;
    for (std::size_t i = 0; i < g[0][l].numel(); ++i) {
      double mean = 0.0;
      for (const auto& b : g) mean += b[l][i];
      mean /= nb;
      double var = 0.0;
      for (const auto& b : g) var += (b[l][i] - mean) * (b[l][i] - mean);
      layer += std::fabs(mean) / (std::sqrt(var / nb) + 1e-12);
    }
    total += std::log(layer);
  }
  return sanitize(total);
}

ProxyScore zico(const Network& net, std::uint64_t seed, int batches, std::size_t batch_size) {
  Stopwatch sw;
  if (batches < 2) throw ContractError("zico: needs at least 2 batches (gradient std is undefined for one)");
  std::vector<std::vector<Tensor>> grads;
  for (int b = 0; b < batches; ++b) {
    const std::uint64_t s = derive_seed({seed, static_cast<std::uint64_t>(b), 0x21c0});
    Tape tape;
    const ForwardTrace tr = net.forward(tape, gaussian_batch(net, batch_size, s));
    tape.backward(ops::cross_entropy(tr.logits, random_labels(batch_size, net.num_classes(), s)));
    std::vector<Tensor> layer_grads;
    for (const auto& lt : tr.layers) layer_grads.push_back(tape.grad(lt.weight.id));
    grads.push_back(std::move(layer_grads));
  }
  return {"zico", zico_from_gradients(grads), sw.seconds()};
}

linalg::Matrix ntk_matrix(const Network& net, const Tensor& batch) {
  const std::size_t n = batch.dim(0);
  std::vector<std::vector<double>> rows(n);
  for (std::size_t i = 0; i < n; ++i) {
    Tape tape;
    const ForwardTrace tr = net.forward(tape, slice_sample(batch, i));
    tape.backward(ops::sum(tr.logits));
    for (const auto& lt : tr.layers)
      for (Var p : {lt.weight, lt.bias}) {
        if (p.tape == nullptr) continue;
        const Tensor& g = tape.grad(p.id);
        rows[i].insert(rows[i].end(), g.data().begin(), g.data().end());
      }
  }
  linalg::Matrix k(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < rows[i].size(); ++p) s += rows[i][p] * rows[j][p];
      k(i, j) = k(j, i) = s;
    }
  return k;
}

double condition_number(const linalg::Matrix& m) {
  for (double v : m.data)
    if (!std::isfinite(v)) return std::numeric_limits<double>::quiet_NaN();
  const auto ev = linalg::symmetric_eigenvalues(m);
  if (ev.empty()) return std::numeric_limits<double>::quiet_NaN();
  if (!(ev.front() > 0.0)) return std::numeric_limits<double>::infinity();
  return ev.back() / ev.front();
}

TenasComponents tenas(const Network& net, std::uint64_t seed, const TenasOptions& options) {
  TenasComponents c;
  c.condition_number = condition_number(
      ntk_matrix(net, gaussian_batch(net, options.ntk_samples, derive_seed({seed, 0x7e1}))));

  Tape tape;
  ForwardOptions fo;
  fo.params_require_grad = false;
  const Tensor region_batch = gaussian_batch(net, options.region_samples, derive_seed({seed, 0x7e2}));
  const auto codes = relu_codes(net.forward(tape, region_batch, fo), options.region_samples);
  std::unordered_set<std::vector<bool>> distinct(codes.begin(), codes.end());
  c.linear_regions = static_cast<double>(distinct.size());
  c.standalone = sanitize(c.linear_regions - std::log(c.condition_number));
  return c;
}

std::vector<double> tenas_rank_sum(const std::vector<TenasComponents>& pop) {
  std::vector<double> neg_kappa, regions;
  for (const auto& c : pop) {
    neg_kappa.push_back(sanitize(-c.condition_number));
    regions.push_back(c.linear_regions);
  }
  const auto rk = average_ranks(neg_kappa);
  const auto rr = average_ranks(regions);
  std::vector<double> out(pop.size());
  for (std::size_t i = 0; i < pop.size(); ++i) out[i] = rk[i] + rr[i];
  return out;
}

double eigen_entropy(const linalg::Matrix& cov) {
  const auto ev = linalg::symmetric_eigenvalues(cov);
  double total = 0.0;
  for (double e : ev) total += std::max(e, 0.0);
  if (!(total > 0.0)) return 0.0;
  double h = 0.0;
  for (double e : ev) {
    const double p = std::max(e, 0.0) / total;
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

linalg::Matrix channel_covariance(const Tensor& f) {
  if (f.rank() < 2) throw ShapeError("channel_covariance", "expected [N, C, ...], got " + shape_str(f.shape()));
  const std::size_t n = f.dim(0), c = f.dim(1), pos = f.numel() / (n * c);
  const std::size_t samples = n * pos;
  std::vector<double> mean(c, 0.0);
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t p = 0; p < pos; ++p) mean[ch] += f[(s * c + ch) * pos + p];
  for (double& m : mean) m /= static_cast<double>(samples);
  linalg::Matrix cov(c, c);
  std::vector<double> centered(c);
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t p = 0; p < pos; ++p) {
      for (std::size_t ch = 0; ch < c; ++ch) centered[ch] = f[(s * c + ch) * pos + p] - mean[ch];
      for (std::size_t i = 0; i < c; ++i)
        for (std::size_t j = i; j < c; ++j) cov(i, j) += centered[i] * centered[j];
    }
  for (std::size_t i = 0; i < c; ++i)
    for (std::size_t j = i; j < c; ++j) cov(j, i) = (cov(i, j) /= static_cast<double>(samples));
  return cov;
}

Tensor rademacher(const Shape& shape, std::uint64_t seed) {
  Tensor t(shape);
  Rng rng(derive_seed({seed, 0x4ade}));
  std::bernoulli_distribution coin(0.5);
  for (double& v : t.data()) v = coin(rng) ? 1.0 : -1.0;
  return t;
}

AzComponents aznas_components(const Network& net, const Tensor& batch, std::uint64_t seed) {
  AzComponents az;
  Tape tape;
  ForwardOptions fo;
  fo.input_requires_grad = true;
  fo.params_require_grad = false;
  const ForwardTrace tr = net.forward(tape, batch, fo);
  const std::size_t blocks = tr.block_outputs.size();

  std::vector<double> expr(blocks);
  for (std::size_t b = 0; b < blocks; ++b) expr[b] = eigen_entropy(channel_covariance(tr.block_outputs[b].value()));
  az.expressivity = sanitize(std::accumulate(expr.begin(), expr.end(), 0.0));

  if (blocks >= 2) {
    double prog = std::numeric_limits<double>::infinity();
    for (std::size_t b = 0; b + 1 < blocks; ++b) prog = std::min(prog, expr[b + 1] - expr[b]);
    az.progressivity = sanitize(prog);
  } else {
    az.progressivity_defined = false;
  }

  double train = 0.0;
  for (std::size_t b = 0; b < blocks; ++b) {
    const Var in = tr.block_inputs[b];
    const Var out = tr.block_outputs[b];
    const Tensor v = rademacher(out.shape(), derive_seed({seed, b}));
    tape.backward(ops::sum(ops::multiply(tape.constant(v), out)), in.id);
    const Tensor& g = tape.grad(in.id);
    const std::size_t n = g.dim(0), cin = g.dim(1), cout = v.dim(1);
    const std::size_t pos = g.numel() / (n * cin);
    if (v.numel() / (n * cout) != pos)
      throw ShapeError("aznas_components", "block changes spatial size; Jacobian estimate undefined");
    linalg::Matrix jac(cin, cout);
    for (std::size_t s = 0; s < n; ++s)
      for (std::size_t i = 0; i < cin; ++i)
        for (std::size_t o = 0; o < cout; ++o) {
          double acc = 0.0;
          const double* gi = g.data().data() + (s * cin + i) * pos;
          const double* vo = v.data().data() + (s * cout + o) * pos;
          for (std::size_t p = 0; p < pos; ++p) acc += gi[p] * vo[p];
          jac(i, o) += acc;
        }
    for (double& x : jac.data) x /= static_cast<double>(n * pos);
    train -= std::fabs(std::log(linalg::spectral_norm(jac, 20, derive_seed({seed, b, 0x5e}))));
  }
  az.trainability = sanitize(train);
  az.flops = static_cast<double>(count_flops(net, net.sample_shape()));
  return az;
}

std::vector<double> aznas_aggregate(const std::vector<AzComponents>& pop) {
  if (pop.size() < 2) throw ContractError("aznas_aggregate: population needs at least 2 networks");
  const double n = static_cast<double>(pop.size());
  std::vector<double> out(pop.size(), 0.0);
  for (int p = 0; p < 4; ++p) {
    std::vector<double> col;
    for (const auto& c : pop) {
      const double v[4] = {c.expressivity, c.progressivity, c.trainability, c.flops};
      col.push_back(sanitize(v[p]));
    }
    const auto r = average_ranks(col);
    for (std::size_t i = 0; i < pop.size(); ++i) out[i] += std::log(r[i] / n);
  }
  return out;
}

ProxyScore eznas(const ProbeRecord& record, const FormulaRegistry& registry) {
  Stopwatch sw;
  const double v = eval_formula(registry.get("eznas"), record);
  return {"eznas", v, sw.seconds()};
}

}  // namespace gf
