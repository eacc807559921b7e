// Copyright (c) 2026 The lreid Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "lreid/backbone.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <random>
#include <sstream>

#include "lreid/domain_bank.hpp"

namespace lreid {

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::conv: return "conv";
    case LayerKind::bn: return "bn";
    case LayerKind::pool: return "pool";
    case LayerKind::activation: return "activation";
    case LayerKind::neck_bn: return "neck-bn";
  }
  return "?";
}

std::vector<int> BackboneGraph::conv_layers() const {
  std::vector<int> out;
  for (const auto& l : layers) {
    if (l.kind == LayerKind::conv) out.push_back(l.index);
  }
  return out;
}

std::vector<int> BackboneGraph::bn_layers() const {
  std::vector<int> out;
  for (const auto& l : layers) {
    if (l.kind == LayerKind::bn || l.kind == LayerKind::neck_bn) out.push_back(l.index);
  }
  return out;
}

int BackboneGraph::last_stage_activation() const {
  for (const auto& l : layers) {
    if (l.kind == LayerKind::pool && l.spatial.pool == PoolKind::global_avg) return l.source;
  }
  throw std::logic_error("graph '" + arch_id + "' has no global pooling layer");
}

void BackboneGraph::validate() const {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    require(l.index == static_cast<int>(i), "layer indices must be ordinal");
    require(l.source < l.index && l.source >= kImageInput, "layer source must precede it");
    if (l.kind == LayerKind::conv) {
      require(i + 1 < layers.size() && layers[i + 1].kind == LayerKind::bn &&
                  layers[i + 1].out_channels == l.out_channels &&
                  layers[i + 1].source == l.index,
              "conv layer " + std::to_string(i) + " must feed a BN of equal width");
    }
  }
  require(!layers.empty() && layers.back().kind == LayerKind::neck_bn,
          "graph must end with the neck BN");
  require(layers.back().out_channels == feature_dim, "feature_dim must equal the neck width");
  for (int idx : sa_placement) {
    require(idx >= 0 && idx < static_cast<int>(layers.size()) &&
                layers[idx].kind == LayerKind::conv,
            "SA placement index " + std::to_string(idx) + " is not a conv layer");
  }
}

// ---------------------------------------------------------------------------
// Architecture registry

namespace {

class GraphBuilder {
 public:
  explicit GraphBuilder(std::string arch) { g_.arch_id = std::move(arch); }

  int conv(int source, int in, int out, int k, int stride, int pad, int stage) {
    LayerSpec l;
    l.kind = LayerKind::conv;
    l.in_channels = in;
    l.out_channels = out;
    l.spatial = {k, stride, pad, PoolKind::max};
    l.frozen = true;
    l.source = source;
    l.stage = stage;
    return push(l);
  }
  int bn(int source, int channels, int stage, LayerKind kind = LayerKind::bn) {
    LayerSpec l;
    l.kind = kind;
    l.in_channels = channels;
    l.out_channels = channels;
    l.source = source;
    l.stage = stage;
    return push(l);
  }
  int conv_bn(int source, int in, int out, int k, int stride, int pad, int stage) {
    const int c = conv(source, in, out, k, stride, pad, stage);
    return bn(c, out, stage);
  }
  int relu(int source, int channels, int stage, int shortcut = kNoShortcut) {
    LayerSpec l;
    l.kind = LayerKind::activation;
    l.in_channels = channels;
    l.out_channels = channels;
    l.source = source;
    l.shortcut = shortcut;
    l.stage = stage;
    return push(l);
  }
  int pool(int source, int channels, PoolKind kind, int k, int stride, int pad, int stage) {
    LayerSpec l;
    l.kind = LayerKind::pool;
    l.in_channels = channels;
    l.out_channels = channels;
    l.spatial = {k, stride, pad, kind};
    l.source = source;
    l.stage = stage;
    return push(l);
  }
  BackboneGraph finish(int gap_source, int channels) {
    const int gap = pool(gap_source, channels, PoolKind::global_avg, 0, 1, 0, 0);
    bn(gap, channels, 0, LayerKind::neck_bn);
    g_.feature_dim = channels;
    g_.validate();
    return std::move(g_);
  }

 private:
  int push(LayerSpec l) {
    l.index = static_cast<int>(g_.layers.size());
    g_.layers.push_back(l);
    return l.index;
  }
  BackboneGraph g_;
};

// 3 -> 8 -> 16 -> 32, 3x3 convs, two 2x2 max pools.
BackboneGraph build_tiny() {
  GraphBuilder b("tiny");
  int x = b.conv_bn(kImageInput, 3, 8, 3, 1, 1, 1);
  x = b.relu(x, 8, 1);
  x = b.pool(x, 8, PoolKind::max, 2, 2, 0, 1);
  x = b.conv_bn(x, 8, 16, 3, 1, 1, 2);
  x = b.relu(x, 16, 2);
  x = b.pool(x, 16, PoolKind::max, 2, 2, 0, 2);
  x = b.conv_bn(x, 16, 32, 3, 1, 1, 3);
  x = b.relu(x, 32, 3);
  return b.finish(x, 32);
}

// Bottleneck ResNet-50 with stride on the 3x3 conv and last stride 1.
BackboneGraph build_resnet50() {
  GraphBuilder b("resnet50");
  int x = b.conv_bn(kImageInput, 3, 64, 7, 2, 3, 1);
  x = b.relu(x, 64, 1);
  x = b.pool(x, 64, PoolKind::max, 3, 2, 1, 1);
  struct StageDef {
    int planes, blocks, stride;
  };
  const StageDef stages[] = {{64, 3, 1}, {128, 4, 2}, {256, 6, 2}, {512, 3, 1}};
  int in = 64;
  for (int s = 0; s < 4; ++s) {
    const auto& def = stages[s];
    const int stage = s + 1;
    for (int blk = 0; blk < def.blocks; ++blk) {
      const int stride = blk == 0 ? def.stride : 1;
      const int out = def.planes * 4;
      const int block_in = x;
      int y = b.conv_bn(block_in, in, def.planes, 1, 1, 0, stage);
      y = b.relu(y, def.planes, stage);
      y = b.conv_bn(y, def.planes, def.planes, 3, stride, 1, stage);
      y = b.relu(y, def.planes, stage);
      y = b.conv_bn(y, def.planes, out, 1, 1, 0, stage);
      int shortcut = block_in;
      if (blk == 0) shortcut = b.conv_bn(block_in, in, out, 1, stride, 0, stage);
      x = b.relu(y, out, stage, shortcut);
      in = out;
    }
  }
  return b.finish(x, 2048);
}

int parse_int(std::string_view s) {
  int v = 0;
  const auto* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || p != end) {
    throw std::invalid_argument("expected an integer, got '" + std::string(s) + "'");
  }
  return v;
}

// "2-4" or "3,4" or "0,4,8"
std::set<int> parse_int_set(std::string_view s) {
  std::set<int> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto comma = s.find(',', start);
    const auto item = s.substr(start, comma == std::string_view::npos ? s.npos : comma - start);
    if (!item.empty()) {
      const auto dash = item.find('-');
      if (dash != std::string_view::npos) {
        const int lo = parse_int(item.substr(0, dash));
        const int hi = parse_int(item.substr(dash + 1));
        for (int v = lo; v <= hi; ++v) out.insert(v);
      } else {
        out.insert(parse_int(item));
      }
    }
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace

std::vector<std::string> registered_architectures() { return {"resnet50", "tiny"}; }

BackboneGraph build_graph(std::string_view arch_id) {
  if (arch_id == "tiny") return build_tiny();
  if (arch_id == "resnet50") return build_resnet50();
  throw std::invalid_argument("unknown architecture '" + std::string(arch_id) +
                              "' (registered: resnet50, tiny)");
}

ParameterPartition partition(const BackboneGraph& graph) {
  ParameterPartition p;
  for (const auto& l : graph.layers) {
    std::int64_t n = 0;
    if (l.kind == LayerKind::conv) {
      n = static_cast<std::int64_t>(l.in_channels) * l.out_channels * l.spatial.kernel *
          l.spatial.kernel;
    } else if (l.kind == LayerKind::bn || l.kind == LayerKind::neck_bn) {
      n = 2 * static_cast<std::int64_t>(l.out_channels);
    }
    (l.frozen ? p.frozen_count : p.tunable_count) += n;
    if (graph.sa_placement.count(l.index) != 0) {
      p.tunable_count += sa_param_count(l.out_channels, graph.sa_kernel_size);
    }
  }
  return p;
}

SaPlacement SaPlacement::parse(std::string_view text) {
  if (text == "all") return all();
  if (text == "none") return none();
  if (text.starts_with("stages:")) return {Mode::stages, parse_int_set(text.substr(7))};
  if (text.starts_with("conv:")) return {Mode::indices, parse_int_set(text.substr(5))};
  throw std::invalid_argument("bad SA placement '" + std::string(text) +
                              "' (use all, none, stages:<list> or conv:<list>)");
}

std::string SaPlacement::to_string() const {
  auto join = [this] {
    std::ostringstream os;
    bool first = true;
    for (int v : values) {
      os << (first ? "" : ",") << v;
      first = false;
    }
    return os.str();
  };
  switch (mode) {
    case Mode::all: return "all";
    case Mode::none: return "none";
    case Mode::stages: return "stages:" + join();
    case Mode::indices: return "conv:" + join();
  }
  return "all";
}

std::set<int> SaPlacement::resolve(const BackboneGraph& graph) const {
  std::set<int> out;
  for (const auto& l : graph.layers) {
    if (l.kind != LayerKind::conv) continue;
    if (mode == Mode::all || (mode == Mode::stages && values.count(l.stage) != 0)) {
      out.insert(l.index);
    }
  }
  if (mode == Mode::indices) {
    for (int idx : values) {
      require(idx >= 0 && idx < static_cast<int>(graph.layers.size()) &&
                  graph.layers[idx].kind == LayerKind::conv,
              "SA placement index " + std::to_string(idx) + " is not a conv layer");
      out.insert(idx);
    }
  }
  return out;
}

BackboneGraph insert_sa(BackboneGraph graph, const SaPlacement& placement, int kernel_size) {
  require(kernel_size > 0 && kernel_size % 2 == 1,
          "SA kernel size must be odd and positive, got " + std::to_string(kernel_size));
  graph.sa_placement = placement.resolve(graph);
  graph.sa_kernel_size = graph.sa_placement.empty() ? 0 : kernel_size;
  graph.validate();
  return graph;
}

// ---------------------------------------------------------------------------
// Network

void Gradients::zero() {
  for (auto* group : {&conv, &gamma, &beta, &sa}) {
    for (auto& v : *group) std::fill(v.begin(), v.end(), 0.0f);
  }
}

Network::Network(BackboneGraph graph, std::uint64_t seed) : graph_(std::move(graph)) {
  graph_.validate();
  const std::size_t n = graph_.layers.size();
  conv_.resize(n);
  bn_.resize(n);
  sa_.resize(n);
  std::mt19937_64 rng(seed);
  for (const auto& l : graph_.layers) {
    if (l.kind == LayerKind::conv) {
      const auto geo = conv_geometry(l.index);
      const double fan_in = static_cast<double>(l.in_channels) * l.spatial.kernel * l.spatial.kernel;
      std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
      conv_[l.index].resize(geo.weight_count());
      for (auto& v : conv_[l.index]) v = static_cast<float>(dist(rng));
    } else if (l.kind == LayerKind::bn || l.kind == LayerKind::neck_bn) {
      bn_[l.index] = BnLayerState::neutral(l.out_channels);
    }
  }
  for (int idx : graph_.sa_placement) {
    sa_[idx] = sa_init_identity(graph_.layers[idx].out_channels, graph_.sa_kernel_size);
  }
}

ops::ConvGeometry Network::conv_geometry(int layer) const {
  const auto& l = graph_.layers.at(layer);
  require(l.kind == LayerKind::conv, "layer " + std::to_string(layer) + " is not a conv");
  return {l.in_channels, l.out_channels, l.spatial.kernel, l.spatial.stride, l.spatial.padding};
}

void Network::insert_sa(const SaPlacement& placement, int kernel_size) {
  graph_ = lreid::insert_sa(std::move(graph_), placement, kernel_size);
  std::fill(sa_.begin(), sa_.end(), std::nullopt);
  for (int idx : graph_.sa_placement) {
    sa_[idx] = sa_init_identity(graph_.layers[idx].out_channels, kernel_size);
  }
}

void Network::set_conv_frozen(bool frozen) {
  for (auto& l : graph_.layers) {
    if (l.kind == LayerKind::conv) l.frozen = frozen;
  }
}

bool Network::conv_frozen() const {
  return std::all_of(graph_.layers.begin(), graph_.layers.end(),
                     [](const LayerSpec& l) { return l.kind != LayerKind::conv || l.frozen; });
}

void Network::load_weights(const NamedArrays& weights) {
  if (!weights.arch_id.empty() && weights.arch_id != graph_.arch_id) {
    throw FormatError("weights are for '" + weights.arch_id + "', graph is '" +
                      graph_.arch_id + "'");
  }
  std::set<std::string> known;
  auto take = [&](const std::string& name, std::size_t expected,
                  std::span<float> dst) -> bool {
    known.insert(name);
    const NamedArray* a = weights.find(name);
    if (a == nullptr) return false;
    if (a->data.size() != expected) {
      throw FormatError("weight '" + name + "' has " + std::to_string(a->data.size()) +
                        " values, architecture expects " + std::to_string(expected));
    }
    std::copy(a->data.begin(), a->data.end(), dst.begin());
    return true;
  };
  for (const auto& l : graph_.layers) {
    const std::string prefix = "layer" + std::to_string(l.index) + ".";
    if (l.kind == LayerKind::conv) {
      if (!take(prefix + "weight", conv_[l.index].size(), conv_[l.index])) {
        throw FormatError("weight source lacks '" + prefix + "weight'");
      }
    } else if (l.kind == LayerKind::bn || l.kind == LayerKind::neck_bn) {
      auto& s = bn_[l.index];
      const auto c = static_cast<std::size_t>(l.out_channels);
      take(prefix + "gamma", c, s.gamma);
      take(prefix + "beta", c, s.beta);
      take(prefix + "running_mean", c, s.running_mean);
      take(prefix + "running_var", c, s.running_var);
      s.validate();
    }
  }
  for (const auto& e : weights.entries) {
    if (known.count(e.name) == 0) {
      throw FormatError("weight source has unexpected entry '" + e.name + "'");
    }
  }
}

NamedArrays Network::export_weights() const {
  NamedArrays out;
  out.arch_id = graph_.arch_id;
  for (const auto& l : graph_.layers) {
    const std::string prefix = "layer" + std::to_string(l.index) + ".";
    if (l.kind == LayerKind::conv) {
      const auto geo = conv_geometry(l.index);
      out.entries.push_back({prefix + "weight",
                             {static_cast<std::uint32_t>(geo.out_channels),
                              static_cast<std::uint32_t>(geo.in_channels),
                              static_cast<std::uint32_t>(geo.kernel),
                              static_cast<std::uint32_t>(geo.kernel)},
                             conv_[l.index]});
    } else if (l.kind == LayerKind::bn || l.kind == LayerKind::neck_bn) {
      const auto& s = bn_[l.index];
      const std::vector<std::uint32_t> shape{static_cast<std::uint32_t>(l.out_channels)};
      out.entries.push_back({prefix + "gamma", shape, s.gamma});
      out.entries.push_back({prefix + "beta", shape, s.beta});
      out.entries.push_back({prefix + "running_mean", shape, s.running_mean});
      out.entries.push_back({prefix + "running_var", shape, s.running_var});
    }
  }
  return out;
}

void Network::apply(const DomainSnapshot& snapshot) {
  if (snapshot.arch_id != graph_.arch_id) {
    throw std::invalid_argument("snapshot for '" + snapshot.arch_id + "' applied to '" +
                                graph_.arch_id + "'");
  }
  const auto bn_layers = graph_.bn_layers();
  const std::vector<int> sa_layers(graph_.sa_placement.begin(), graph_.sa_placement.end());
  if (snapshot.bn_layers != bn_layers || snapshot.sa_layers != sa_layers) {
    throw std::invalid_argument("snapshot '" + snapshot.domain_id +
                                "' layer inventory does not match the graph");
  }
  for (std::size_t i = 0; i < bn_layers.size(); ++i) {
    require(snapshot.bn_states[i].channels() == graph_.layers[bn_layers[i]].out_channels,
            "snapshot BN width mismatch");
    bn_[bn_layers[i]] = snapshot.bn_states[i];
  }
  for (std::size_t i = 0; i < sa_layers.size(); ++i) {
    const auto& k = snapshot.sa_kernels[i];
    require(k.channels == graph_.layers[sa_layers[i]].out_channels &&
                k.kernel_size == graph_.sa_kernel_size,
            "snapshot SA kernel shape mismatch");
    sa_[sa_layers[i]] = k;
  }
}

Tensor Network::forward(const Tensor& images, Mode mode, ForwardTrace* trace) {
  return run(images, mode, trace, mode == Mode::train ? &bn_ : nullptr);
}

Tensor Network::forward_eval(const Tensor& images, ForwardTrace* trace) const {
  return run(images, Mode::eval, trace, nullptr);
}

Tensor Network::run(const Tensor& images, Mode mode, ForwardTrace* trace,
                    std::vector<BnLayerState>* train_states) const {
  require(images.n > 0, "forward: empty batch");
  require(images.c == 3, "forward: expected 3-channel images, got " + images.shape_str());
  const std::size_t n = graph_.layers.size();
  std::vector<Tensor> local;
  std::vector<Tensor>& out = trace != nullptr ? trace->outputs : local;
  out.assign(n, Tensor());
  if (trace != nullptr) {
    trace->mode = mode;
    trace->input = images;
    trace->conv_raw.assign(n, Tensor());
    trace->bn.assign(n, BnTrainCache());
    trace->pool_argmax.assign(n, {});
  }
  // Without a trace, drop intermediates once their last consumer has run.
  std::vector<int> last_use(n, -1);
  for (const auto& l : graph_.layers) {
    if (l.source >= 0) last_use[l.source] = l.index;
    if (l.shortcut >= 0) last_use[l.shortcut] = std::max(last_use[l.shortcut], l.index);
  }

  for (const auto& l : graph_.layers) {
    const Tensor& in = l.source == kImageInput ? images : out[l.source];
    switch (l.kind) {
      case LayerKind::conv: {
        Tensor y = ops::conv2d_forward(conv_geometry(l.index), conv_[l.index], in);
        if (sa_[l.index].has_value()) {
          Tensor adapted = sa_forward(*sa_[l.index], y);
          if (trace != nullptr) trace->conv_raw[l.index] = std::move(y);
          y = std::move(adapted);
        }
        out[l.index] = std::move(y);
        break;
      }
      case LayerKind::bn:
      case LayerKind::neck_bn:
        if (mode == Mode::train) {
          require(train_states != nullptr, "train-mode forward needs mutable BN state");
          out[l.index] = bn_forward_train((*train_states)[l.index], in,
                                          trace != nullptr ? &trace->bn[l.index] : nullptr);
        } else {
          out[l.index] = bn_forward_eval(bn_[l.index], in);
        }
        break;
      case LayerKind::activation:
        out[l.index] = ops::relu_forward(in, l.shortcut >= 0 ? &out[l.shortcut] : nullptr);
        break;
      case LayerKind::pool:
        if (l.spatial.pool == PoolKind::global_avg) {
          out[l.index] = ops::global_avg_pool_forward(in);
        } else {
          auto r = ops::maxpool_forward(in, l.spatial.kernel, l.spatial.stride, l.spatial.padding);
          out[l.index] = std::move(r.out);
          if (trace != nullptr) trace->pool_argmax[l.index] = std::move(r.argmax);
        }
        break;
    }
    if (trace == nullptr) {
      for (int src : {l.source, l.shortcut}) {
        if (src >= 0 && last_use[src] == l.index) out[src] = Tensor();
      }
    }
  }
  Tensor features = out.back();
  for (float v : features.data) {
    if (!std::isfinite(v)) throw std::runtime_error("forward produced non-finite features");
  }
  return features;
}

void Network::backward(const ForwardTrace& trace, const Tensor& dfeatures, Gradients& grads) const {
  require(trace.mode == Mode::train, "backward needs a train-mode trace");
  const std::size_t n = graph_.layers.size();
  require(trace.outputs.size() == n, "trace does not belong to this graph");
  std::vector<Tensor> grad(n);
  grad[n - 1] = dfeatures;
  auto accumulate = [&](int target, Tensor&& g) {
    if (target < 0) return;
    if (grad[target].size() == 0) {
      grad[target] = std::move(g);
    } else {
      for (std::size_t i = 0; i < g.size(); ++i) grad[target].data[i] += g.data[i];
    }
  };
  // Earliest layer whose input gradient is needed: the first trainable one.
  int first_trainable = static_cast<int>(n);
  for (const auto& l : graph_.layers) {
    const bool trainable = l.kind == LayerKind::bn || l.kind == LayerKind::neck_bn ||
                           (l.kind == LayerKind::conv && (!l.frozen || sa_[l.index]));
    if (trainable) {
      first_trainable = l.index;
      break;
    }
  }

  for (int i = static_cast<int>(n) - 1; i >= 0; --i) {
    const auto& l = graph_.layers[i];
    if (grad[i].size() == 0) continue;
    Tensor g = std::move(grad[i]);
    const bool need_input = l.index > first_trainable && l.source != kImageInput;
    const Tensor& in = l.source == kImageInput ? trace.input : trace.outputs[l.source];
    switch (l.kind) {
      case LayerKind::conv: {
        Tensor conv_grad = std::move(g);
        if (sa_[i].has_value()) {
          conv_grad = sa_backward(*sa_[i], trace.conv_raw[i], conv_grad, grads.sa[i],
                                  need_input || !l.frozen);
        }
        if (!l.frozen || need_input) {
          std::span<float> dw = l.frozen ? std::span<float>() : std::span<float>(grads.conv[i]);
          accumulate(l.source, ops::conv2d_backward(conv_geometry(i), conv_[i], in, conv_grad, dw,
                                                    need_input));
        }
        break;
      }
      case LayerKind::bn:
      case LayerKind::neck_bn:
        accumulate(l.source, bn_backward_train(bn_[i], trace.bn[i], g, grads.gamma[i],
                                               grads.beta[i], need_input));
        break;
      case LayerKind::activation: {
        Tensor d = ops::relu_backward(trace.outputs[i], g);
        if (l.shortcut >= 0) accumulate(l.shortcut, Tensor(d));
        accumulate(l.source, std::move(d));
        break;
      }
      case LayerKind::pool:
        if (l.spatial.pool == PoolKind::global_avg) {
          accumulate(l.source, ops::global_avg_pool_backward(in, g));
        } else {
          accumulate(l.source, ops::maxpool_backward(in, trace.pool_argmax[i], g));
        }
        break;
    }
  }
}

Gradients Network::make_gradients() const {
  Gradients g;
  const std::size_t n = graph_.layers.size();
  g.conv.resize(n);
  g.gamma.resize(n);
  g.beta.resize(n);
  g.sa.resize(n);
  for (const auto& l : graph_.layers) {
    if (l.kind == LayerKind::conv) {
      g.conv[l.index].assign(conv_[l.index].size(), 0.0f);
      if (sa_[l.index]) g.sa[l.index].assign(sa_[l.index]->weights.size(), 0.0f);
    } else if (l.kind == LayerKind::bn || l.kind == LayerKind::neck_bn) {
      g.gamma[l.index].assign(l.out_channels, 0.0f);
      g.beta[l.index].assign(l.out_channels, 0.0f);
    }
  }
  return g;
}

std::vector<ParamView> Network::trainable(Gradients& grads) {
  std::vector<ParamView> out;
  for (const auto& l : graph_.layers) {
    const std::string prefix = "layer" + std::to_string(l.index) + ".";
    if (l.kind == LayerKind::conv) {
      if (!l.frozen) out.push_back({prefix + "weight", conv_[l.index], grads.conv[l.index]});
      if (sa_[l.index]) out.push_back({prefix + "sa", sa_[l.index]->weights, grads.sa[l.index]});
    } else if (l.kind == LayerKind::bn || l.kind == LayerKind::neck_bn) {
      out.push_back({prefix + "gamma", bn_[l.index].gamma, grads.gamma[l.index]});
      out.push_back({prefix + "beta", bn_[l.index].beta, grads.beta[l.index]});
    }
  }
  return out;
}

std::int64_t Network::parameter_count() const {
  const auto p = partition(graph_);
  return p.frozen_count + p.tunable_count;
}

BuiltBackbone build_and_partition(std::string_view arch_id, const NamedArrays* pretrained,
                                  std::uint64_t seed) {
  Network net(build_graph(arch_id), seed);
  if (pretrained != nullptr) net.load_weights(*pretrained);
  auto part = partition(net.graph());
  return {std::move(net), part};
}

Tensor extract_features(Network& network, const Tensor& images, const DomainSnapshot& snapshot,
                        Mode mode) {
  network.apply(snapshot);
  if (mode == Mode::eval) return network.forward_eval(images);
  return network.forward(images, Mode::train);
}

}  // namespace lreid
