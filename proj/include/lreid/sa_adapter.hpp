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

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "lreid/tensor.hpp"

namespace lreid {

/// Depth-wise, bias-free k x k kernel bank: one kernel per channel, stride 1,
/// zero padding (k-1)/2 so the spatial size is preserved.
struct SaKernel {
  int channels = 0;
  int kernel_size = 0;
  std::vector<float> weights;  // channels x k x k

  std::size_t taps() const { return static_cast<std::size_t>(kernel_size) * kernel_size; }
  std::span<const float> channel_kernel(int c) const {
    return {weights.data() + c * taps(), taps()};
  }
  bool operator==(const SaKernel&) const = default;
};

/// Dirac kernels: 1 at the center tap, 0 elsewhere. Throws on even k.
SaKernel sa_init_identity(int channels, int kernel_size);

/// M * k^2.
std::int64_t sa_param_count(std::int64_t channels, std::int64_t kernel_size);

Tensor sa_forward(const SaKernel& kernel, const Tensor& x);

/// Accumulates dL/dweights into dweights (size channels*k*k) and returns dL/dx.
Tensor sa_backward(const SaKernel& kernel, const Tensor& x, const Tensor& dy,
                   std::span<float> dweights, bool need_input_grad = true);

namespace detail {

// Per-channel correlation over planes laid out as batch x channels x h x w.
// Templated so gradient checks can run the same arithmetic in double.
template <typename T>
void depthwise_correlate(std::span<const T> weights, int channels, int k, std::span<const T> x,
                         int batch, int h, int w, std::span<T> y) {
  const int r = (k - 1) / 2;
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  for (int b = 0; b < batch; ++b) {
    for (int c = 0; c < channels; ++c) {
      const T* in = x.data() + (static_cast<std::size_t>(b) * channels + c) * plane;
      T* out = y.data() + (static_cast<std::size_t>(b) * channels + c) * plane;
      const T* ker = weights.data() + static_cast<std::size_t>(c) * k * k;
      for (std::size_t i = 0; i < plane; ++i) out[i] = T(0);
      for (int ky = 0; ky < k; ++ky) {
        const int dy = ky - r;
        const int y0 = dy < 0 ? -dy : 0;
        const int y1 = dy > 0 ? h - dy : h;
        for (int kx = 0; kx < k; ++kx) {
          const T wv = ker[ky * k + kx];
          if (wv == T(0)) continue;
          const int dx = kx - r;
          const int x0 = dx < 0 ? -dx : 0;
          const int x1 = dx > 0 ? w - dx : w;
          for (int oy = y0; oy < y1; ++oy) {
            const T* src = in + (oy + dy) * w + dx;
            T* dst = out + oy * w;
            for (int ox = x0; ox < x1; ++ox) dst[ox] += wv * src[ox];
          }
        }
      }
    }
  }
}

template <typename T>
void depthwise_correlate_backward(std::span<const T> weights, int channels, int k,
                                  std::span<const T> x, int batch, int h, int w,
                                  std::span<const T> dy_grad, std::span<T> dweights,
                                  std::span<T> dx_grad) {
  const int r = (k - 1) / 2;
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  for (std::size_t i = 0; i < dx_grad.size(); ++i) dx_grad[i] = T(0);
  for (int b = 0; b < batch; ++b) {
    for (int c = 0; c < channels; ++c) {
      const std::size_t off = (static_cast<std::size_t>(b) * channels + c) * plane;
      const T* in = x.data() + off;
      const T* g = dy_grad.data() + off;
      T* din = dx_grad.empty() ? nullptr : dx_grad.data() + off;
      const T* ker = weights.data() + static_cast<std::size_t>(c) * k * k;
      T* dker = dweights.empty() ? nullptr : dweights.data() + static_cast<std::size_t>(c) * k * k;
      for (int ky = 0; ky < k; ++ky) {
        const int dy = ky - r;
        const int y0 = dy < 0 ? -dy : 0;
        const int y1 = dy > 0 ? h - dy : h;
        for (int kx = 0; kx < k; ++kx) {
          const int dx = kx - r;
          const int x0 = dx < 0 ? -dx : 0;
          const int x1 = dx > 0 ? w - dx : w;
          const T wv = ker[ky * k + kx];
          T acc = T(0);
          for (int oy = y0; oy < y1; ++oy) {
            const T* src = in + (oy + dy) * w + dx;
            const T* grow = g + oy * w;
            if (dker != nullptr) {
              for (int ox = x0; ox < x1; ++ox) acc += grow[ox] * src[ox];
            }
            if (din != nullptr && wv != T(0)) {
              T* dsrc = din + (oy + dy) * w + dx;
              for (int ox = x0; ox < x1; ++ox) dsrc[ox] += wv * grow[ox];
            }
          }
          if (dker != nullptr) dker[ky * k + kx] += acc;
        }
      }
    }
  }
}

}  // namespace detail
}  // namespace lreid
