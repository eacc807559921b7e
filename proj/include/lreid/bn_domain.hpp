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

#include <span>
#include <vector>

#include "lreid/tensor.hpp"

namespace lreid {

inline constexpr float kDefaultBnEps = 1e-5f;
inline constexpr float kDefaultBnMomentum = 0.1f;

/// One BN layer's per-domain state: running statistics, affine and constants.
struct BnLayerState {
  std::vector<float> running_mean;
  std::vector<float> running_var;
  std::vector<float> gamma;
  std::vector<float> beta;
  float eps = kDefaultBnEps;
  float momentum = kDefaultBnMomentum;

  /// mean 0, var 1, gamma 1, beta 0.
  static BnLayerState neutral(int channels);

  int channels() const { return static_cast<int>(gamma.size()); }
  /// Throws when vector lengths disagree, eps <= 0, momentum outside (0,1) or var < 0.
  void validate() const;
  bool operator==(const BnLayerState&) const = default;
};

/// Batch statistics retained for the backward pass.
struct BnTrainCache {
  std::vector<float> mean;
  std::vector<float> inv_std;
  Tensor normalized;  // pre-affine x_hat
};

/// Normalizes with batch statistics (biased variance over B*H*W) and folds them
/// into the running averages: r <- (1-m) r + m * batch.
Tensor bn_forward_train(BnLayerState& state, const Tensor& x, BnTrainCache* cache = nullptr);

/// Normalizes with the stored running statistics; never mutates state.
Tensor bn_forward_eval(const BnLayerState& state, const Tensor& x);

/// Backward of the train-mode transform. Accumulates into dgamma / dbeta.
Tensor bn_backward_train(const BnLayerState& state, const BnTrainCache& cache, const Tensor& dy,
                         std::span<float> dgamma, std::span<float> dbeta,
                         bool need_input_grad = true);

}  // namespace lreid
