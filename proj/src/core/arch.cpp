#include "gf/arch.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "gf/error.hpp"
#include "gf/rng.hpp"

namespace gf {

SearchSpace parse_search_space(std::string_view tag) {
  if (tag == "tss") return SearchSpace::Tss;
  if (tag == "sss") return SearchSpace::Sss;
  throw ParseError("unknown search space '" + std::string(tag) + "'", 0);
}

std::string_view to_string(SearchSpace space) { return space == SearchSpace::Tss ? "tss" : "sss"; }

std::string to_string(const ArchSpec& spec) {
  std::ostringstream os;
  if (const auto* cell = std::get_if<CellSpec>(&spec)) {
    os << "tss|";
    for (std::size_t i = 0; i < cell->edges.size(); ++i)
      os << (i ? "," : "") << kCellOpNames[static_cast<std::size_t>(cell->edges[i])];
  } else {
    const auto& size = std::get<SizeSpec>(spec);
    os << "sss|";
    for (std::size_t i = 0; i < size.widths.size(); ++i) os << (i ? "," : "") << size.widths[i];
  }
  return os.str();
}

namespace {

// Splits on ',' and reports each token with its offset.
std::vector<std::pair<std::string_view, std::size_t>> split_fields(std::string_view body, std::size_t base) {
  std::vector<std::pair<std::string_view, std::size_t>> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = body.find(',', start);
    const std::size_t end = comma == std::string_view::npos ? body.size() : comma;
    out.emplace_back(body.substr(start, end - start), base + start);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace

ArchSpec parse_spec(std::string_view text) {
  const std::size_t bar = text.find('|');
  if (bar == std::string_view::npos) throw ParseError("spec is missing '|' separator", text.size());
  const std::string_view tag = text.substr(0, bar);
  const auto fields = split_fields(text.substr(bar + 1), bar + 1);
  if (tag == "tss") {
    if (fields.size() != 6)
      throw ParseError("tss spec needs 6 edge operations, got " + std::to_string(fields.size()), bar + 1);
    CellSpec cell;
    for (std::size_t i = 0; i < 6; ++i) {
      const auto it = std::find(kCellOpNames.begin(), kCellOpNames.end(), fields[i].first);
      if (it == kCellOpNames.end())
        throw ParseError("unknown cell operation '" + std::string(fields[i].first) + "'", fields[i].second);
      cell.edges[i] = static_cast<CellOp>(it - kCellOpNames.begin());
    }
    return cell;
  }
  if (tag == "sss") {
    if (fields.size() != 5)
      throw ParseError("sss spec needs 5 stage widths, got " + std::to_string(fields.size()), bar + 1);
    SizeSpec size;
    for (std::size_t i = 0; i < 5; ++i) {
      const auto& [tok, off] = fields[i];
      std::size_t w = 0;
      if (tok.empty() || tok.size() > 3 || tok.find_first_not_of("0123456789") != std::string_view::npos ||
          (tok.size() > 1 && tok[0] == '0'))
        throw ParseError("invalid stage width '" + std::string(tok) + "'", off);
      for (char ch : tok) w = w * 10 + static_cast<std::size_t>(ch - '0');
      if (std::find(kStageWidths.begin(), kStageWidths.end(), w) == kStageWidths.end())
        throw ParseError("stage width " + std::to_string(w) + " not in {8,16,...,64}", off);
      size.widths[i] = w;
    }
    return size;
  }
  throw ParseError("unknown search space '" + std::string(tag) + "'", 0);
}

SearchSpace space_of(const ArchSpec& spec) {
  return std::holds_alternative<CellSpec>(spec) ? SearchSpace::Tss : SearchSpace::Sss;
}

void set_num_classes(ArchSpec& spec, std::size_t num_classes) {
  std::visit([num_classes](auto& s) { s.num_classes = num_classes; }, spec);
}

ArchSpec sample_spec(SearchSpace space, std::uint64_t seed) {
  Rng rng(derive_seed({seed, 0x5a11}));
  if (space == SearchSpace::Tss) {
    std::uniform_int_distribution<std::size_t> pick(0, kCellOpNames.size() - 1);
    CellSpec cell;
    for (auto& e : cell.edges) e = static_cast<CellOp>(pick(rng));
    return cell;
  }
  std::uniform_int_distribution<std::size_t> pick(0, kStageWidths.size() - 1);
  SizeSpec size;
  for (auto& w : size.widths) w = kStageWidths[pick(rng)];
  return size;
}

namespace {

ParamLayer conv_layer(std::string name, std::size_t in, std::size_t out, std::size_t k, std::size_t down) {
  ParamLayer l;
  l.kind = LayerKind::Conv;
  l.name = std::move(name);
  l.weight = Tensor({out, in, k, k});
  l.bias = Tensor({out});
  l.downsample = down;
  return l;
}

ParamLayer linear_layer(std::string name, std::size_t in, std::size_t out, bool bias) {
  ParamLayer l;
  l.kind = LayerKind::Linear;
  l.name = std::move(name);
  l.weight = Tensor({in, out});
  if (bias) l.bias = Tensor({out});
  return l;
}

// SSS stages 3 and 5 follow a 2x2 average pool.
constexpr std::array<std::size_t, 5> kStageDownsample = {1, 1, 2, 2, 4};

std::vector<ParamLayer> plan_layers(const Topology& topo) {
  std::vector<ParamLayer> layers;
  if (const auto* cell = std::get_if<CellSpec>(&topo)) {
    const std::size_t c = cell->stem_channels;
    layers.push_back(conv_layer("stem", 3, c, 3, 1));
    for (std::size_t b = 0; b < cell->num_cells; ++b)
      for (std::size_t e = 0; e < 6; ++e) {
        const CellOp op = cell->edges[e];
        if (op != CellOp::Conv1x1 && op != CellOp::Conv3x3) continue;
        const std::size_t k = op == CellOp::Conv1x1 ? 1 : 3;
        layers.push_back(conv_layer("cell" + std::to_string(b) + ".edge" + std::to_string(e), c, c, k, 1));
      }
    layers.push_back(linear_layer("head", c, cell->num_classes, true));
  } else if (const auto* size = std::get_if<SizeSpec>(&topo)) {
    std::size_t in = 3;
    for (std::size_t s = 0; s < 5; ++s) {
      layers.push_back(conv_layer("stage" + std::to_string(s), in, size->widths[s], 3, kStageDownsample[s]));
      in = size->widths[s];
    }
    layers.push_back(linear_layer("head", in, size->num_classes, true));
  } else {
    const auto& mlp = std::get<MlpSpec>(topo);
    if (mlp.sizes.size() < 2) throw ContractError("mlp needs at least input and output sizes");
    for (std::size_t i = 0; i + 1 < mlp.sizes.size(); ++i)
      layers.push_back(linear_layer("fc" + std::to_string(i), mlp.sizes[i], mlp.sizes[i + 1], mlp.bias));
  }
  return layers;
}

void kaiming_init(std::vector<ParamLayer>& layers, std::uint64_t seed) {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    auto& l = layers[i];
    const std::size_t fan_in =
        l.kind == LayerKind::Conv ? l.weight.dim(1) * l.weight.dim(2) * l.weight.dim(3) : l.weight.dim(0);
    Rng rng(derive_seed({seed, i, 0x1417}));
    std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
    for (double& w : l.weight.data()) w = normal(rng);
    for (double& b : l.bias.data()) b = 0.0;
  }
}

}  // namespace

Network Network::instantiate(const ArchSpec& spec, std::uint64_t init_seed, std::size_t resolution) {
  if (resolution < 4 || resolution % 4 != 0) throw ContractError("resolution must be a positive multiple of 4");
  Network net;
  net.topology_ = std::visit([](const auto& s) -> Topology { return s; }, spec);
  net.init_seed_ = init_seed;
  net.resolution_ = resolution;
  net.layers_ = plan_layers(net.topology_);
  kaiming_init(net.layers_, init_seed);
  return net;
}

Network Network::mlp(const MlpSpec& spec, std::uint64_t init_seed) {
  Network net;
  net.topology_ = spec;
  net.init_seed_ = init_seed;
  net.resolution_ = 0;
  net.layers_ = plan_layers(net.topology_);
  kaiming_init(net.layers_, init_seed);
  return net;
}

Network Network::reinitialized(std::uint64_t init_seed) const {
  Network net = *this;
  net.init_seed_ = init_seed;
  kaiming_init(net.layers_, init_seed);
  return net;
}

std::size_t Network::num_classes() const {
  return layers_.back().weight.dim(1);
}

Shape Network::sample_shape() const {
  if (const auto* mlp = std::get_if<MlpSpec>(&topology_)) return {mlp->sizes.front()};
  return {3, resolution_, resolution_};
}

Shape Network::batch_shape(std::size_t batch) const {
  Shape s = sample_shape();
  s.insert(s.begin(), batch);
  return s;
}

ForwardTrace Network::forward(Tape& tape, const Tensor& input, const ForwardOptions& options) const {
  const Shape expect = batch_shape(input.rank() ? input.dim(0) : 0);
  if (input.shape() != expect)
    throw ShapeError("forward", "input " + shape_str(input.shape()) + " does not match network input " +
                                    shape_str(expect));
  ForwardTrace tr;
  tr.input = tape.leaf(input, options.input_requires_grad);
  std::size_t next_layer = 0;

  auto param = [&](const Tensor& t) {
    if (!options.abs_weights) return tape.leaf(t, options.params_require_grad);
    Tensor a = t;
    for (double& v : a.data()) v = std::fabs(v);
    return tape.leaf(std::move(a), options.params_require_grad);
  };
  // Applies the next parameterized layer to x (bias added, no activation).
  auto apply = [&](Var x) {
    const ParamLayer& l = layers_.at(next_layer++);
    LayerTrace lt;
    lt.input = x;
    lt.weight = param(l.weight);
    Var y = l.kind == LayerKind::Conv ? ops::conv2d(x, lt.weight) : ops::matmul(x, lt.weight);
    if (!l.bias.empty()) {
      lt.bias = param(l.bias);
      y = ops::add_bias(y, lt.bias);
    }
    lt.output = y;
    tr.layers.push_back(lt);
    return y;
  };
  auto relu = [&](Var x) {
    tr.relu_inputs.push_back(x);
    return ops::relu(x);
  };
  auto head = [&](Var fmap) {
    tr.features = fmap;
    tr.logits = apply(ops::global_avg_pool(fmap));
  };

  if (const auto* cell = std::get_if<CellSpec>(&topology_)) {
    Var x = relu(apply(tr.input));
    for (std::size_t b = 0; b < cell->num_cells; ++b) {
      tr.block_inputs.push_back(x);
      std::array<Var, 4> nodes{};
      std::array<bool, 4> live{};
      nodes[0] = x;
      live[0] = true;
      for (std::size_t e = 0; e < 6; ++e) {
        const auto [from, to] = kCellEdges[e];
        const CellOp op = cell->edges[e];
        if (op == CellOp::None) continue;
        Var src = live[from] ? nodes[from] : tape.constant(Tensor(x.shape()));
        Var out;
        switch (op) {
          case CellOp::Skip: out = src; break;
          case CellOp::Conv1x1:
          case CellOp::Conv3x3: out = relu(apply(src)); break;
          case CellOp::AvgPool3x3: out = ops::avg_pool2d(src, 3, 1, 1); break;
          case CellOp::None: break;
        }
        nodes[to] = live[to] ? ops::add(nodes[to], out) : out;
        live[to] = true;
      }
      x = live[3] ? nodes[3] : tape.constant(Tensor(x.shape()));
      tr.block_outputs.push_back(x);
    }
    head(x);
  } else if (std::holds_alternative<SizeSpec>(topology_)) {
    Var x = tr.input;
    for (std::size_t s = 0; s < 5; ++s) {
      if (s == 2 || s == 4) x = ops::avg_pool2d(x, 2, 2, 0);
      tr.block_inputs.push_back(x);
      x = relu(apply(x));
      tr.block_outputs.push_back(x);
    }
    head(x);
  } else {
    const auto& mlp = std::get<MlpSpec>(topology_);
    Var x = tr.input;
    for (std::size_t i = 0; i + 1 < mlp.sizes.size(); ++i) {
      const bool last = i + 2 == mlp.sizes.size();
      if (last) tr.features = x;
      tr.block_inputs.push_back(x);
      x = apply(x);
      if (!last && mlp.relu) x = relu(x);
      tr.block_outputs.push_back(x);
    }
    tr.logits = x;
  }
  return tr;
}

std::size_t count_params(const Network& net) {
  std::size_t n = 0;
  for (const auto& l : net.layers()) n += l.weight.numel() + l.bias.numel();
  return n;
}

std::uint64_t count_flops(const Network& net, const Shape& input_shape) {
  const Shape sample = net.sample_shape();
  std::uint64_t batch = 1;
  Shape s = input_shape;
  if (s.size() == sample.size() + 1) {
    batch = s.front();
    s.erase(s.begin());
  }
  if (s.size() != sample.size() || (sample.size() == 3 && s[0] != sample[0]) ||
      (sample.size() == 1 && s != sample))
    throw ShapeError("count_flops", "input " + shape_str(input_shape) + " does not match network input " +
                                        shape_str(sample));
  std::uint64_t flops = 0;
  for (const auto& l : net.layers()) {
    if (l.kind == LayerKind::Linear) {
      flops += 2ULL * l.weight.dim(0) * l.weight.dim(1);
    } else {
      const std::uint64_t positions = (s[1] / l.downsample) * (s[2] / l.downsample);
      flops += 2ULL * l.weight.numel() * positions;
    }
  }
  return flops * batch;
}

int effective_depth(const ArchSpec& spec) {
  if (const auto* cell = std::get_if<CellSpec>(&spec)) {
    std::array<int, 4> depth = {0, -1, -1, -1};
    for (std::size_t e = 0; e < 6; ++e) {
      const auto [from, to] = kCellEdges[e];
      const CellOp op = cell->edges[e];
      if (op == CellOp::None || depth[from] < 0) continue;
      const int d = depth[from] + ((op == CellOp::Conv1x1 || op == CellOp::Conv3x3) ? 1 : 0);
      depth[to] = std::max(depth[to], d);
    }
    return depth[3] < 0 ? -1 : depth[3] * static_cast<int>(cell->num_cells);
  }
  return 5;
}

Dataset parse_dataset(std::string_view tag) {
  for (std::size_t i = 0; i < kDatasetNames.size(); ++i)
    if (kDatasetNames[i] == tag) return static_cast<Dataset>(i);
  throw DataError("unknown dataset tag '" + std::string(tag) + "'");
}

std::string_view to_string(Dataset d) { return kDatasetNames[static_cast<std::size_t>(d)]; }

std::size_t dataset_classes(Dataset d) {
  switch (d) {
    case Dataset::Cifar10: return 10;
    case Dataset::Cifar100: return 100;
    case Dataset::Imagenet16: return 120;
  }
  return 10;
}

namespace {

struct SurrogateConstants {
  double base;
  double per_log_param;
  double per_depth;
  double flops_penalty;
  double flops_center;  // ln(FLOPs) of the sweet spot
  double chance;        // accuracy of a disconnected network
};

// Fixed constants of the synthetic target. Indexed [space][dataset].
constexpr SurrogateConstants kSurrogate[2][3] = {
    // tss
    {{25.0, 6.0, 0.5, 5.0, 14.9, 10.0},
     {-1.7, 6.0, 0.5, 5.0, 14.9, 1.0},
     {-23.9, 6.0, 0.5, 5.0, 14.9, 0.8}},
    // sss
    {{3.5, 7.0, 0.0, 7.5, 15.9, 10.0},
     {-22.1, 7.0, 0.0, 7.5, 15.9, 1.0},
     {-44.2, 7.0, 0.0, 7.5, 15.9, 0.8}},
};

}  // namespace

double surrogate_accuracy(const ArchSpec& spec, Dataset dataset, std::uint64_t noise_seed) {
  ArchSpec s = spec;
  set_num_classes(s, dataset_classes(dataset));
  const auto& k = kSurrogate[space_of(spec) == SearchSpace::Tss ? 0 : 1][static_cast<std::size_t>(dataset)];
  Rng rng(derive_seed({noise_seed, static_cast<std::uint64_t>(dataset), 0xacc}));
  std::normal_distribution<double> noise(0.0, 2.0);
  const double eps = noise(rng);

  const Network net = Network::instantiate(s, 0);
  const double params = static_cast<double>(count_params(net));
  const double flops = static_cast<double>(count_flops(net, net.sample_shape()));
  const int depth = effective_depth(spec);
  double acc;
  if (depth < 0) {
    acc = k.chance + 0.25 * eps;
  } else {
    const double dl = std::log(flops) - k.flops_center;
    acc = k.base + k.per_log_param * std::log(params) + k.per_depth * depth - k.flops_penalty * dl * dl + eps;
  }
  return std::clamp(acc, 0.0, 100.0);
}

}  // namespace gf
