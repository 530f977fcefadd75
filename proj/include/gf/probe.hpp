#pragma once

// Clean / noise / perturbation / random-sibling passes over one mini-batch,
// capturing per-layer statistics for the formula proxies.

#include <array>
#include <bitset>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "gf/arch.hpp"
#include "gf/tensor.hpp"

namespace gf {

// Statistic identifiers. For each pass: fwd_input / fwd_output are the layer's
// input and pre-activation output; bwd_input / bwd_output are the loss
// gradients with respect to those two; grad is dL/dW and wt is W.
enum class Stat : std::uint8_t {
  PassFwdInput,
  PassFwdOutput,
  PassBwdInput,
  PassBwdOutput,
  PassGrad,
  PassWt,
  PassNoiseFwdInput,
  PassNoiseFwdOutput,
  PassNoiseBwdInput,
  PassNoiseBwdOutput,
  PassNoiseGrad,
  PassNoiseWt,
  PassPerturbationFwdInput,
  PassPerturbationFwdOutput,
  PassPerturbationBwdInput,
  PassPerturbationBwdOutput,
  PassPerturbationGrad,
  PassPerturbationWt,
  RandomGrad,
  RandomWt,
};

inline constexpr std::size_t kStatCount = 20;

inline constexpr std::array<std::string_view, kStatCount> kStatNames = {
    "pass_fwd_input",
    "pass_fwd_output",
    "pass_bwd_input",
    "pass_bwd_output",
    "pass_grad",
    "pass_wt",
    "pass_noise_fwd_input",
    "pass_noise_fwd_output",
    "pass_noise_bwd_input",
    "pass_noise_bwd_output",
    "pass_noise_grad",
    "pass_noise_wt",
    "pass_perturbation_fwd_input",
    "pass_perturbation_fwd_output",
    "pass_perturbation_bwd_input",
    "pass_perturbation_bwd_output",
    "pass_perturbation_grad",
    "pass_perturbation_wt",
    "random_grad",
    "random_wt",
};

std::optional<Stat> stat_from_name(std::string_view name);
inline std::string_view stat_name(Stat s) { return kStatNames[static_cast<std::size_t>(s)]; }

using StatSet = std::bitset<kStatCount>;
inline StatSet all_stats() { return StatSet().set(); }

struct LayerStats {
  std::array<std::optional<Tensor>, kStatCount> values;

  bool has(Stat s) const { return values[static_cast<std::size_t>(s)].has_value(); }
  const Tensor& get(Stat s) const;  // ContractError when absent
};

struct ProbeRecord {
  std::vector<LayerStats> layers;  // network forward order, parameterized layers only
  std::vector<std::string> layer_names;
  std::uint64_t seed = 0;
  double noise_sigma = 0.0;
  double perturb_eps = 0.0;
};

struct ProbeOptions {
  double noise_sigma = 1.0;
  double perturb_eps = 0.01;
  std::uint64_t seed = 0;  // drives labels, noise, perturbation and the sibling init
  StatSet required = all_stats();
};

// Which of the four passes a statistic set needs.
struct PassPlan {
  bool clean_forward = false;
  bool clean_backward = false;
  bool noise_forward = false;
  bool noise_backward = false;
  bool perturbation_forward = false;
  bool perturbation_backward = false;
  bool random_init = false;
  bool random_backward = false;
};
PassPlan plan_passes(const StatSet& required);

ProbeRecord run_probes(const Network& net, const Tensor& batch, const ProbeOptions& options = {});

// Seeded uniform labels in [0, num_classes).
std::vector<std::size_t> random_labels(std::size_t n, std::size_t num_classes, std::uint64_t seed);

// Standard-normal batch of the network's input shape.
Tensor gaussian_batch(const Network& net, std::size_t batch, std::uint64_t seed);

struct CostSample {
  double mean_seconds = 0.0;
  double rel_std = 0.0;
};

struct CaptureCost {
  CostSample clean;         // clean forward + backward
  CostSample noise;
  CostSample perturbation;
  CostSample random;        // sibling init + its forward + backward
  CostSample all;           // full run_probes
};

CaptureCost capture_cost(const Network& net, const Tensor& batch, int reps, const ProbeOptions& options = {});

}  // namespace gf
