#pragma once

// Zero-cost proxies. Each maps a randomly initialized network (plus a batch
// or a ProbeRecord) to one scalar; non-finite raw results become kSentinel.

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "gf/arch.hpp"
#include "gf/linalg.hpp"
#include "gf/probe.hpp"

namespace gf {

class FormulaRegistry;

// Ranks strictly below every genuine score.
inline constexpr double kSentinel = -1e9;

double sanitize(double raw);

struct ProxyScore {
  std::string proxy_id;
  double value = 0.0;
  double cost_seconds = 0.0;
};

// log|det K| with K_ij = N_A - hamming(c_i, c_j) over relu on/off codes.
ProxyScore naswot(const Network& net, const Tensor& batch);
// Kernel from explicit binary codes (rows of `codes`).
double naswot_from_codes(const std::vector<std::vector<bool>>& codes);

// Sum over parameters of |theta * dR/dtheta| with |weights| and an all-ones
// input. The network itself is never modified.
ProxyScore synflow(const Network& net);

// Sum over layers of ||pass_grad||_2.
ProxyScore gradnorm(const ProbeRecord& record);

struct ZenOptions {
  double eps = 0.01;
  int draws = 8;
};
// log of the mean ||f(x) - f(x + eps * d)||_F over Gaussian (x, d) sample
// draws, f being the pre-head feature map.
ProxyScore zen_score(const Network& net, std::uint64_t seed, const ZenOptions& options = {});
using FeatureMap = std::function<Tensor(const Tensor&)>;
// f maps a [draws, sample_shape...] batch to per-sample features.
double zen_score(const FeatureMap& f, const Shape& sample_shape, std::uint64_t seed, const ZenOptions& options = {});

// Sum over layers of log( sum_theta |mean g| / (std g + 1e-12) ) across batches.
ProxyScore zico(const Network& net, std::uint64_t seed, int batches = 2, std::size_t batch_size = 16);
double zico_from_gradients(const std::vector<std::vector<Tensor>>& per_batch_layer_grads);

struct TenasComponents {
  double condition_number = 0.0;  // cond of the NTK over the NTK batch
  double linear_regions = 0.0;    // distinct relu patterns over the region batch
  double standalone = 0.0;        // R - log(kappa), sanitized
};
struct TenasOptions {
  std::size_t ntk_samples = 8;
  std::size_t region_samples = 32;
};
TenasComponents tenas(const Network& net, std::uint64_t seed, const TenasOptions& options = {});
// Empirical NTK (Gram of per-sample parameter gradients of the summed logits).
linalg::Matrix ntk_matrix(const Network& net, const Tensor& batch);
double condition_number(const linalg::Matrix& symmetric_psd);
// Population score: rank(-kappa) + rank(R), average ranks for ties.
std::vector<double> tenas_rank_sum(const std::vector<TenasComponents>& population);

struct AzComponents {
  double expressivity = 0.0;
  double progressivity = 0.0;  // 0 when the network has a single block
  bool progressivity_defined = true;
  double trainability = 0.0;
  double flops = 0.0;
};
// Entropy of the normalized eigenvalues of a covariance; log(dim) is maximal.
double eigen_entropy(const linalg::Matrix& covariance);
// Channel covariance of a [N, C, ...] or [N, C] feature tensor (spatial
// positions are samples).
linalg::Matrix channel_covariance(const Tensor& features);
// Rademacher +-1 tensor.
Tensor rademacher(const Shape& shape, std::uint64_t seed);
AzComponents aznas_components(const Network& net, const Tensor& batch, std::uint64_t seed);
// sum_p ln(rank_p(a) / n) with ascending average ranks; needs >= 2 networks.
std::vector<double> aznas_aggregate(const std::vector<AzComponents>& population);

// Formula program registered under "eznas".
ProxyScore eznas(const ProbeRecord& record, const FormulaRegistry& registry);

// Ascending average ranks in [1, n] (ties share the mean rank).
std::vector<double> average_ranks(const std::vector<double>& values);

}  // namespace gf
