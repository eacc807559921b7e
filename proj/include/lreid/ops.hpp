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

// Stateless dense-network primitives used by the backbone executor.
namespace lreid::ops {

struct ConvGeometry {
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 1;
  int stride = 1;
  int padding = 0;

  int out_h(int h) const { return (h + 2 * padding - kernel) / stride + 1; }
  int out_w(int w) const { return (w + 2 * padding - kernel) / stride + 1; }
  std::size_t weight_count() const {
    return static_cast<std::size_t>(out_channels) * in_channels * kernel * kernel;
  }
};

/// Dense bias-free 2-D cross-correlation. weights: out x in x k x k.
Tensor conv2d_forward(const ConvGeometry& g, std::span<const float> weights, const Tensor& x);

/// Accumulates into dweights when it is non-empty; returns dL/dx when need_input_grad.
Tensor conv2d_backward(const ConvGeometry& g, std::span<const float> weights, const Tensor& x,
                       const Tensor& dy, std::span<float> dweights, bool need_input_grad);

struct MaxPoolResult {
  Tensor out;
  std::vector<int> argmax;  // flat input offset per output element
};

MaxPoolResult maxpool_forward(const Tensor& x, int kernel, int stride, int padding);
Tensor maxpool_backward(const Tensor& x, const std::vector<int>& argmax, const Tensor& dy);

Tensor global_avg_pool_forward(const Tensor& x);
Tensor global_avg_pool_backward(const Tensor& x, const Tensor& dy);

/// y = max(0, x + shortcut); shortcut may be null.
Tensor relu_forward(const Tensor& x, const Tensor* shortcut);
/// Masks dy by the positive part of the forward output.
Tensor relu_backward(const Tensor& y, const Tensor& dy);

}  // namespace lreid::ops
