#include "gf/probe.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "gf/error.hpp"
#include "gf/rng.hpp"

namespace gf {

std::optional<Stat> stat_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kStatCount; ++i)
    if (kStatNames[i] == name) return static_cast<Stat>(i);
  return std::nullopt;
}

const Tensor& LayerStats::get(Stat s) const {
  const auto& v = values[static_cast<std::size_t>(s)];
  if (!v) throw ContractError("statistic " + std::string(stat_name(s)) + " was not captured");
  return *v;
}

namespace {

// Offsets of the six per-pass statistics relative to the pass's first id.
enum PassSlot { kFwdIn = 0, kFwdOut, kBwdIn, kBwdOut, kGrad, kWt };

constexpr std::size_t kCleanBase = static_cast<std::size_t>(Stat::PassFwdInput);
constexpr std::size_t kNoiseBase = static_cast<std::size_t>(Stat::PassNoiseFwdInput);
constexpr std::size_t kPerturbBase = static_cast<std::size_t>(Stat::PassPerturbationFwdInput);
constexpr std::size_t kRandomGrad = static_cast<std::size_t>(Stat::RandomGrad);
constexpr std::size_t kRandomWt = static_cast<std::size_t>(Stat::RandomWt);

bool any_of(const StatSet& s, std::size_t base, std::initializer_list<PassSlot> slots) {
  for (auto slot : slots)
    if (s.test(base + slot)) return true;
  return false;
}

// Runs one forward (and optionally backward) pass and stores the requested
// statistics at ids base + slot.
void capture_pass(const Network& net, const Tensor& input, const std::vector<std::size_t>& labels, bool backward,
                  const StatSet& required, std::size_t base, ProbeRecord& rec) {
  Tape tape;
  ForwardOptions fo;
  // Weight gradients are skipped when only activation gradients are wanted;
  // the input then has to require grad so the chain is still recorded.
  fo.params_require_grad = backward && required.test(base + kGrad);
  fo.input_requires_grad = backward && (required.test(base + kBwdIn) || !fo.params_require_grad);
  ForwardTrace tr = net.forward(tape, input, fo);
  if (backward) tape.backward(ops::cross_entropy(tr.logits, labels));
  for (std::size_t i = 0; i < tr.layers.size(); ++i) {
    auto& dst = rec.layers[i].values;
    const LayerTrace& lt = tr.layers[i];
    if (required.test(base + kFwdIn)) dst[base + kFwdIn] = lt.input.value();
    if (required.test(base + kFwdOut)) dst[base + kFwdOut] = lt.output.value();
    if (backward) {
      // The stem's input is a leaf; when it does not require grad the
      // gradient is all zeros, which grad() reports.
      if (required.test(base + kBwdIn)) dst[base + kBwdIn] = tape.grad(lt.input.id);
      if (required.test(base + kBwdOut)) dst[base + kBwdOut] = tape.grad(lt.output.id);
      if (required.test(base + kGrad)) dst[base + kGrad] = tape.grad(lt.weight.id);
    }
  }
}

}  // namespace

PassPlan plan_passes(const StatSet& r) {
  PassPlan p;
  p.clean_backward = any_of(r, kCleanBase, {kBwdIn, kBwdOut, kGrad});
  p.clean_forward = p.clean_backward || any_of(r, kCleanBase, {kFwdIn, kFwdOut});
  p.noise_backward = any_of(r, kNoiseBase, {kBwdIn, kBwdOut, kGrad});
  p.noise_forward = p.noise_backward || any_of(r, kNoiseBase, {kFwdIn, kFwdOut});
  p.perturbation_backward = any_of(r, kPerturbBase, {kBwdIn, kBwdOut, kGrad});
  p.perturbation_forward = p.perturbation_backward || any_of(r, kPerturbBase, {kFwdIn, kFwdOut});
  p.random_backward = r.test(kRandomGrad);
  p.random_init = p.random_backward || r.test(kRandomWt);
  return p;
}

std::vector<std::size_t> random_labels(std::size_t n, std::size_t num_classes, std::uint64_t seed) {
  Rng rng(derive_seed({seed, 0x1abe1}));
  std::uniform_int_distribution<std::size_t> pick(0, num_classes - 1);
  std::vector<std::size_t> labels(n);
  for (auto& l : labels) l = pick(rng);
  return labels;
}

Tensor gaussian_batch(const Network& net, std::size_t batch, std::uint64_t seed) {
  Tensor x(net.batch_shape(batch));
  Rng rng(derive_seed({seed, 0xba7c4}));
  std::normal_distribution<double> normal;
  for (double& v : x.data()) v = normal(rng);
  return x;
}

ProbeRecord run_probes(const Network& net, const Tensor& batch, const ProbeOptions& options) {
  if (!(options.noise_sigma >= 0.0) || !(options.perturb_eps >= 0.0))
    throw ContractError("run_probes: noise_sigma and perturb_eps must be non-negative");
  if (batch.shape() != net.batch_shape(batch.rank() ? batch.dim(0) : 0))
    throw ShapeError("run_probes", "batch " + shape_str(batch.shape()) + " does not match network input " +
                                       shape_str(net.sample_shape()));
  const StatSet& req = options.required;
  const PassPlan plan = plan_passes(req);
  ProbeRecord rec;
  rec.seed = options.seed;
  rec.noise_sigma = options.noise_sigma;
  rec.perturb_eps = options.perturb_eps;
  rec.layers.resize(net.layers().size());
  for (const auto& l : net.layers()) rec.layer_names.push_back(l.name);

  const auto labels = random_labels(batch.dim(0), net.num_classes(), options.seed);

  for (std::size_t i = 0; i < net.layers().size(); ++i) {
    auto& dst = rec.layers[i].values;
    for (std::size_t base : {kCleanBase, kNoiseBase, kPerturbBase})
      if (req.test(base + kWt)) dst[base + kWt] = net.layers()[i].weight;
  }

  if (plan.clean_forward) capture_pass(net, batch, labels, plan.clean_backward, req, kCleanBase, rec);

  if (plan.noise_forward) {
    Tensor noisy = batch;
    Rng rng(derive_seed({options.seed, 0x7015e}));
    std::normal_distribution<double> normal;
    for (double& v : noisy.data()) v += options.noise_sigma * normal(rng);
    capture_pass(net, noisy, labels, plan.noise_backward, req, kNoiseBase, rec);
  }

  if (plan.perturbation_forward) {
    Tensor perturbed = batch;
    Rng rng(derive_seed({options.seed, 0x9e47b}));
    std::normal_distribution<double> normal;
    for (double& v : perturbed.data()) {
      const double z = normal(rng);
      v += options.perturb_eps * (z > 0.0 ? 1.0 : (z < 0.0 ? -1.0 : 0.0));
    }
    capture_pass(net, perturbed, labels, plan.perturbation_backward, req, kPerturbBase, rec);
  }

  if (plan.random_init) {
    const Network sibling = net.reinitialized(derive_seed({options.seed, net.init_seed(), 0x5b1}));
    for (std::size_t i = 0; i < sibling.layers().size(); ++i)
      if (req.test(kRandomWt)) rec.layers[i].values[kRandomWt] = sibling.layers()[i].weight;
    if (plan.random_backward) {
      Tape tape;
      ForwardTrace tr = sibling.forward(tape, batch);
      tape.backward(ops::cross_entropy(tr.logits, labels));
      for (std::size_t i = 0; i < tr.layers.size(); ++i)
        rec.layers[i].values[kRandomGrad] = tape.grad(tr.layers[i].weight.id);
    }
  }
  return rec;
}

CaptureCost capture_cost(const Network& net, const Tensor& batch, int reps, const ProbeOptions& options) {
  if (reps < 1) throw ContractError("capture_cost: reps must be at least 1");
  auto measure = [&](StatSet required) {
    ProbeOptions o = options;
    o.required = required;
    std::vector<double> times;
    for (int r = 0; r < reps; ++r) {
      const auto t0 = std::chrono::steady_clock::now();
      volatile auto n = run_probes(net, batch, o).layers.size();
      (void)n;
      times.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    CostSample c;
    for (double t : times) c.mean_seconds += t;
    c.mean_seconds /= static_cast<double>(times.size());
    double var = 0.0;
    for (double t : times) var += (t - c.mean_seconds) * (t - c.mean_seconds);
    var /= static_cast<double>(times.size());
    c.rel_std = c.mean_seconds > 0.0 ? std::sqrt(var) / c.mean_seconds : 0.0;
    return c;
  };
  auto group = [](std::size_t base) {
    StatSet s;
    for (std::size_t k = 0; k < 6; ++k) s.set(base + k);
    return s;
  };
  CaptureCost cost;
  cost.clean = measure(group(kCleanBase));
  cost.noise = measure(group(kNoiseBase));
  cost.perturbation = measure(group(kPerturbBase));
  cost.random = measure(StatSet().set(kRandomGrad).set(kRandomWt));
  cost.all = measure(all_stats());
  return cost;
}

}  // namespace gf
