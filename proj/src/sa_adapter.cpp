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

#include "lreid/sa_adapter.hpp"

#include <string>

namespace lreid {

SaKernel sa_init_identity(int channels, int kernel_size) {
  require(channels > 0, "SA kernel needs a positive channel count");
  require(kernel_size > 0 && kernel_size % 2 == 1,
          "SA kernel size must be odd and positive, got " + std::to_string(kernel_size));
  SaKernel k{channels, kernel_size, {}};
  k.weights.assign(static_cast<std::size_t>(channels) * k.taps(), 0.0f);
  const std::size_t center = static_cast<std::size_t>(kernel_size / 2) * kernel_size + kernel_size / 2;
  for (int c = 0; c < channels; ++c) k.weights[c * k.taps() + center] = 1.0f;
  return k;
}

std::int64_t sa_param_count(std::int64_t channels, std::int64_t kernel_size) {
  return channels * kernel_size * kernel_size;
}

Tensor sa_forward(const SaKernel& kernel, const Tensor& x) {
  require(x.c == kernel.channels, "SA forward: kernel has " + std::to_string(kernel.channels) +
                                      " channels, input has " + std::to_string(x.c));
  Tensor y(x.n, x.c, x.h, x.w);
  detail::depthwise_correlate<float>(kernel.weights, kernel.channels, kernel.kernel_size, x.data,
                                     x.n, x.h, x.w, y.data);
  return y;
}

Tensor sa_backward(const SaKernel& kernel, const Tensor& x, const Tensor& dy,
                   std::span<float> dweights, bool need_input_grad) {
  require(x.c == kernel.channels && dy.same_shape(x), "SA backward: shape mismatch");
  Tensor dx;
  if (need_input_grad) dx = Tensor(x.n, x.c, x.h, x.w);
  detail::depthwise_correlate_backward<float>(kernel.weights, kernel.channels,
                                              kernel.kernel_size, x.data, x.n, x.h, x.w,
                                              dy.data, dweights, dx.data);
  return dx;
}

}  // namespace lreid
