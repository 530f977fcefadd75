#pragma once

// Desk-scale analogues of a cell-topology space (tss) and a channel-size
// space (sss), plus a plain MLP topology used for hand-checkable networks.

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "gf/tensor.hpp"

namespace gf {

enum class SearchSpace { Tss, Sss };

SearchSpace parse_search_space(std::string_view tag);
std::string_view to_string(SearchSpace space);

enum class CellOp : std::uint8_t { None, Skip, Conv1x1, Conv3x3, AvgPool3x3 };

inline constexpr std::array<std::string_view, 5> kCellOpNames = {"none", "skip", "conv1x1", "conv3x3",
                                                                 "avgpool3x3"};
inline constexpr std::array<std::size_t, 8> kStageWidths = {8, 16, 24, 32, 40, 48, 56, 64};

// Edge order: (0->1), (0->2), (1->2), (0->3), (1->3), (2->3).
inline constexpr std::array<std::array<std::size_t, 2>, 6> kCellEdges = {
    {{0, 1}, {0, 2}, {1, 2}, {0, 3}, {1, 3}, {2, 3}}};

struct CellSpec {
  std::array<CellOp, 6> edges{};
  std::size_t stem_channels = 16;
  std::size_t num_cells = 3;
  std::size_t num_classes = 10;
  friend bool operator==(const CellSpec&, const CellSpec&) = default;
};

struct SizeSpec {
  std::array<std::size_t, 5> widths{};
  std::size_t num_classes = 10;
  friend bool operator==(const SizeSpec&, const SizeSpec&) = default;
};

// Fully connected stack; sizes = {in, hidden..., out}.
struct MlpSpec {
  std::vector<std::size_t> sizes;
  bool relu = true;
  bool bias = true;
  friend bool operator==(const MlpSpec&, const MlpSpec&) = default;
};

using ArchSpec = std::variant<CellSpec, SizeSpec>;

// Canonical text form: "tss|op,op,op,op,op,op" or "sss|w,w,w,w,w".
std::string to_string(const ArchSpec& spec);
ArchSpec parse_spec(std::string_view text);
SearchSpace space_of(const ArchSpec& spec);
void set_num_classes(ArchSpec& spec, std::size_t num_classes);

// Uniform draw over the space; deterministic per seed.
ArchSpec sample_spec(SearchSpace space, std::uint64_t seed);

enum class LayerKind { Conv, Linear };

struct ParamLayer {
  LayerKind kind = LayerKind::Conv;
  std::string name;
  Tensor weight;  // conv [out, in, k, k]; linear [in, out]
  Tensor bias;    // [out], empty when the layer has none
  std::size_t downsample = 1;  // spatial stride of this layer's map vs. the input
};

struct LayerTrace {
  Var weight;
  Var bias;
  Var input;
  Var output;  // after bias, before any activation
};

struct ForwardTrace {
  Var input;
  Var logits;
  Var features;  // input of the classifier head's pooling stage
  std::vector<LayerTrace> layers;
  std::vector<Var> relu_inputs;
  std::vector<Var> block_inputs;
  std::vector<Var> block_outputs;
};

struct ForwardOptions {
  bool input_requires_grad = false;
  bool params_require_grad = true;
  bool abs_weights = false;  // feed |w| instead of w
};

using Topology = std::variant<CellSpec, SizeSpec, MlpSpec>;

class Network {
 public:
  static constexpr std::size_t kDefaultResolution = 16;

  // Kaiming-normal weights (std = sqrt(2 / fan_in)), zero biases.
  static Network instantiate(const ArchSpec& spec, std::uint64_t init_seed,
                             std::size_t resolution = kDefaultResolution);
  static Network mlp(const MlpSpec& spec, std::uint64_t init_seed);

  const Topology& topology() const { return topology_; }
  std::uint64_t init_seed() const { return init_seed_; }
  std::size_t resolution() const { return resolution_; }
  std::size_t num_classes() const;

  const std::vector<ParamLayer>& layers() const { return layers_; }
  std::vector<ParamLayer>& layers() { return layers_; }

  // Shape of one input sample ([3, r, r] or [in]).
  Shape sample_shape() const;
  Shape batch_shape(std::size_t batch) const;

  // Same topology, fresh initialization.
  Network reinitialized(std::uint64_t init_seed) const;

  ForwardTrace forward(Tape& tape, const Tensor& input, const ForwardOptions& options = {}) const;

 private:
  Topology topology_;
  std::uint64_t init_seed_ = 0;
  std::size_t resolution_ = kDefaultResolution;
  std::vector<ParamLayer> layers_;
};

std::size_t count_params(const Network& net);

// Multiply-accumulates of conv and linear layers, 2 FLOPs each, for one sample
// of the given shape (a leading batch dimension multiplies the count).
// Pooling, activations, additions and bias terms are not counted.
std::uint64_t count_flops(const Network& net, const Shape& input_shape);

// Longest chain of conv layers from input to output; -1 when the output is
// disconnected from the input.
int effective_depth(const ArchSpec& spec);

enum class Dataset { Cifar10, Cifar100, Imagenet16 };
inline constexpr std::array<std::string_view, 3> kDatasetNames = {"cifar10", "cifar100", "imagenet16"};
Dataset parse_dataset(std::string_view tag);
std::string_view to_string(Dataset d);
std::size_t dataset_classes(Dataset d);

// Synthetic stand-in for trained test accuracy (percent). Clearly not a
// measurement: a fixed function of log-params, effective depth and a
// FLOPs-window penalty, plus seeded N(0, 2^2) noise, clamped to [0, 100].
double surrogate_accuracy(const ArchSpec& spec, Dataset dataset, std::uint64_t noise_seed);

}  // namespace gf
