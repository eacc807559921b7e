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

#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lreid/bn_domain.hpp"
#include "lreid/container.hpp"
#include "lreid/ops.hpp"
#include "lreid/sa_adapter.hpp"
#include "lreid/tensor.hpp"

namespace lreid {

enum class LayerKind { conv, bn, pool, activation, neck_bn };
enum class PoolKind { max, global_avg };

std::string_view to_string(LayerKind kind);

struct SpatialMeta {
  int kernel = 1;
  int stride = 1;
  int padding = 0;
  PoolKind pool = PoolKind::max;
};

inline constexpr int kImageInput = -1;
inline constexpr int kNoShortcut = -1;

struct LayerSpec {
  int index = 0;
  LayerKind kind = LayerKind::conv;
  int in_channels = 0;
  int out_channels = 0;
  SpatialMeta spatial;
  bool frozen = false;
  int source = kImageInput;      // producer layer, or the image input
  int shortcut = kNoShortcut;    // activation only: residual summed before ReLU
  int stage = 0;                 // network stage 1..4 used by SA placement
};

struct BackboneGraph {
  std::string arch_id;
  std::vector<LayerSpec> layers;
  int feature_dim = 0;
  std::set<int> sa_placement;  // conv layer indices carrying an SA kernel
  int sa_kernel_size = 0;      // 0 while no SA is inserted

  std::vector<int> conv_layers() const;
  /// BN layers in graph order, the neck last.
  std::vector<int> bn_layers() const;
  int last_stage_activation() const;
  /// Throws when the pairing / channel / placement invariants are violated.
  void validate() const;
};

struct ParameterPartition {
  std::int64_t frozen_count = 0;
  std::int64_t tunable_count = 0;
};

/// Which conv layers receive an SA kernel.
struct SaPlacement {
  enum class Mode { all, none, stages, indices };
  Mode mode = Mode::all;
  std::set<int> values;

  static SaPlacement all() { return {}; }
  static SaPlacement none() { return {Mode::none, {}}; }
  /// "all", "none", "stages:2-4", "stages:3,4" or "conv:0,4".
  static SaPlacement parse(std::string_view text);
  std::string to_string() const;
  std::set<int> resolve(const BackboneGraph& graph) const;
};

inline constexpr int kDefaultSaKernel = 5;

std::vector<std::string> registered_architectures();
/// Throws std::invalid_argument for unknown architectures.
BackboneGraph build_graph(std::string_view arch_id);
ParameterPartition partition(const BackboneGraph& graph);
/// Pure graph transform; the Network overload also creates identity kernels.
BackboneGraph insert_sa(BackboneGraph graph, const SaPlacement& placement,
                        int kernel_size = kDefaultSaKernel);

enum class Mode { train, eval };

struct DomainSnapshot;

/// Per-layer gradient buffers, indexed like the graph's layers.
struct Gradients {
  std::vector<std::vector<float>> conv;
  std::vector<std::vector<float>> gamma;
  std::vector<std::vector<float>> beta;
  std::vector<std::vector<float>> sa;
  void zero();
};

/// Intermediate values of one forward pass, consumed by backward().
struct ForwardTrace {
  Tensor input;
  std::vector<Tensor> outputs;         // per layer
  std::vector<Tensor> conv_raw;        // conv output before SA (only where SA is placed)
  std::vector<BnTrainCache> bn;        // train mode only
  std::vector<std::vector<int>> pool_argmax;
  Mode mode = Mode::eval;
};

/// A trainable parameter together with its gradient buffer.
struct ParamView {
  std::string name;
  std::span<float> value;
  std::span<float> grad;
};

/// Executable backbone: the layer graph plus its live parameters.
class Network {
 public:
  explicit Network(BackboneGraph graph, std::uint64_t seed = 0);

  const BackboneGraph& graph() const { return graph_; }

  std::span<float> conv_weights(int layer) { return conv_[layer]; }
  std::span<const float> conv_weights(int layer) const { return conv_[layer]; }
  BnLayerState& bn(int layer) { return bn_[layer]; }
  const BnLayerState& bn(int layer) const { return bn_[layer]; }
  SaKernel& sa(int layer) { return *sa_[layer]; }
  const SaKernel& sa(int layer) const { return *sa_[layer]; }
  bool has_sa(int layer) const { return sa_[layer].has_value(); }
  ops::ConvGeometry conv_geometry(int layer) const;

  void insert_sa(const SaPlacement& placement, int kernel_size = kDefaultSaKernel);
  void set_conv_frozen(bool frozen);
  bool conv_frozen() const;

  /// Loads "layer{index}.{weight|gamma|beta|running_mean|running_var}" arrays.
  void load_weights(const NamedArrays& weights);
  NamedArrays export_weights() const;

  /// Overwrites live BN and SA state from a snapshot captured on this graph.
  void apply(const DomainSnapshot& snapshot);

  /// Post-neck features, N x d x 1 x 1.
  Tensor forward(const Tensor& images, Mode mode, ForwardTrace* trace = nullptr);
  Tensor forward_eval(const Tensor& images, ForwardTrace* trace = nullptr) const;
  void backward(const ForwardTrace& trace, const Tensor& dfeatures, Gradients& grads) const;

  Gradients make_gradients() const;
  /// BN/neck affines and SA kernels, plus conv weights when they are not frozen.
  std::vector<ParamView> trainable(Gradients& grads);

  std::int64_t parameter_count() const;

 private:
  Tensor run(const Tensor& images, Mode mode, ForwardTrace* trace,
             std::vector<BnLayerState>* train_states) const;

  BackboneGraph graph_;
  std::vector<std::vector<float>> conv_;
  std::vector<BnLayerState> bn_;
  std::vector<std::optional<SaKernel>> sa_;
};

struct BuiltBackbone {
  Network network;
  ParameterPartition partition;
};

/// Builds the registered architecture with frozen convs. Without a weight
/// source the conv weights come from a seeded He-normal generator.
BuiltBackbone build_and_partition(std::string_view arch_id, const NamedArrays* pretrained = nullptr,
                                  std::uint64_t seed = 0);

/// Eval/train forward with a snapshot applied; features taken after the neck BN.
Tensor extract_features(Network& network, const Tensor& images, const DomainSnapshot& snapshot,
                        Mode mode = Mode::eval);

}  // namespace lreid
