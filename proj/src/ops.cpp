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

#include "lreid/ops.hpp"

#include <algorithm>
#include <limits>

namespace lreid::ops {

namespace {

// col: (in*k*k) x (oh*ow) for one image
void im2col(const ConvGeometry& g, const float* img, int h, int w, int oh, int ow,
            std::vector<float>& col) {
  const int k = g.kernel;
  col.assign(static_cast<std::size_t>(g.in_channels) * k * k * oh * ow, 0.0f);
  std::size_t row = 0;
  for (int c = 0; c < g.in_channels; ++c) {
    const float* plane = img + static_cast<std::size_t>(c) * h * w;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx, ++row) {
        float* dst = col.data() + row * oh * ow;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * g.stride - g.padding + ky;
          if (iy < 0 || iy >= h) continue;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * g.stride - g.padding + kx;
            if (ix >= 0 && ix < w) dst[oy * ow + ox] = plane[iy * w + ix];
          }
        }
      }
    }
  }
}

void col2im(const ConvGeometry& g, const std::vector<float>& col, int h, int w, int oh, int ow,
            float* img) {
  const int k = g.kernel;
  std::size_t row = 0;
  for (int c = 0; c < g.in_channels; ++c) {
    float* plane = img + static_cast<std::size_t>(c) * h * w;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx, ++row) {
        const float* src = col.data() + row * oh * ow;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * g.stride - g.padding + ky;
          if (iy < 0 || iy >= h) continue;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * g.stride - g.padding + kx;
            if (ix >= 0 && ix < w) plane[iy * w + ix] += src[oy * ow + ox];
          }
        }
      }
    }
  }
}

}  // namespace

Tensor conv2d_forward(const ConvGeometry& g, std::span<const float> weights, const Tensor& x) {
  require(x.c == g.in_channels, "conv2d: expected " + std::to_string(g.in_channels) +
                                    " input channels, got " + std::to_string(x.c));
  require(weights.size() == g.weight_count(), "conv2d: weight count mismatch");
  const int oh = g.out_h(x.h);
  const int ow = g.out_w(x.w);
  require(oh > 0 && ow > 0, "conv2d: input " + x.shape_str() + " too small");
  Tensor y(x.n, g.out_channels, oh, ow);
  const std::size_t cols = static_cast<std::size_t>(oh) * ow;
  const std::size_t depth = static_cast<std::size_t>(g.in_channels) * g.kernel * g.kernel;
  std::vector<float> col;
  for (int b = 0; b < x.n; ++b) {
    im2col(g, x.data.data() + static_cast<std::size_t>(b) * x.c * x.plane(), x.h, x.w, oh, ow,
           col);
    float* out = y.data.data() + static_cast<std::size_t>(b) * g.out_channels * cols;
    for (int o = 0; o < g.out_channels; ++o) {
      float* orow = out + o * cols;
      const float* wrow = weights.data() + o * depth;
      for (std::size_t d = 0; d < depth; ++d) {
        const float wv = wrow[d];
        if (wv == 0.0f) continue;
        const float* crow = col.data() + d * cols;
        for (std::size_t j = 0; j < cols; ++j) orow[j] += wv * crow[j];
      }
    }
  }
  return y;
}

Tensor conv2d_backward(const ConvGeometry& g, std::span<const float> weights, const Tensor& x,
                       const Tensor& dy, std::span<float> dweights, bool need_input_grad) {
  const int oh = dy.h;
  const int ow = dy.w;
  const std::size_t cols = static_cast<std::size_t>(oh) * ow;
  const std::size_t depth = static_cast<std::size_t>(g.in_channels) * g.kernel * g.kernel;
  Tensor dx;
  if (need_input_grad) dx = Tensor(x.n, x.c, x.h, x.w);
  std::vector<float> col;
  std::vector<float> dcol;
  for (int b = 0; b < x.n; ++b) {
    const float* grad = dy.data.data() + static_cast<std::size_t>(b) * g.out_channels * cols;
    if (!dweights.empty()) {
      im2col(g, x.data.data() + static_cast<std::size_t>(b) * x.c * x.plane(), x.h, x.w, oh, ow,
             col);
      for (int o = 0; o < g.out_channels; ++o) {
        const float* grow = grad + o * cols;
        float* dwrow = dweights.data() + o * depth;
        for (std::size_t d = 0; d < depth; ++d) {
          const float* crow = col.data() + d * cols;
          float acc = 0.0f;
          for (std::size_t j = 0; j < cols; ++j) acc += grow[j] * crow[j];
          dwrow[d] += acc;
        }
      }
    }
    if (need_input_grad) {
      dcol.assign(depth * cols, 0.0f);
      for (int o = 0; o < g.out_channels; ++o) {
        const float* grow = grad + o * cols;
        const float* wrow = weights.data() + o * depth;
        for (std::size_t d = 0; d < depth; ++d) {
          const float wv = wrow[d];
          if (wv == 0.0f) continue;
          float* drow = dcol.data() + d * cols;
          for (std::size_t j = 0; j < cols; ++j) drow[j] += wv * grow[j];
        }
      }
      col2im(g, dcol, x.h, x.w, oh, ow,
             dx.data.data() + static_cast<std::size_t>(b) * x.c * x.plane());
    }
  }
  return dx;
}

MaxPoolResult maxpool_forward(const Tensor& x, int kernel, int stride, int padding) {
  const int oh = (x.h + 2 * padding - kernel) / stride + 1;
  const int ow = (x.w + 2 * padding - kernel) / stride + 1;
  require(oh > 0 && ow > 0, "maxpool: input " + x.shape_str() + " too small");
  MaxPoolResult r{Tensor(x.n, x.c, oh, ow), {}};
  r.argmax.assign(r.out.size(), -1);
  std::size_t o = 0;
  for (int b = 0; b < x.n; ++b) {
    for (int c = 0; c < x.c; ++c) {
      const std::size_t base = (static_cast<std::size_t>(b) * x.c + c) * x.plane();
      for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox, ++o) {
          float best = -std::numeric_limits<float>::infinity();
          int arg = -1;
          for (int ky = 0; ky < kernel; ++ky) {
            const int iy = oy * stride - padding + ky;
            if (iy < 0 || iy >= x.h) continue;
            for (int kx = 0; kx < kernel; ++kx) {
              const int ix = ox * stride - padding + kx;
              if (ix < 0 || ix >= x.w) continue;
              const float v = x.data[base + iy * x.w + ix];
              if (v > best) {
                best = v;
                arg = static_cast<int>(base) + iy * x.w + ix;
              }
            }
          }
          r.out.data[o] = best;
          r.argmax[o] = arg;
        }
      }
    }
  }
  return r;
}

Tensor maxpool_backward(const Tensor& x, const std::vector<int>& argmax, const Tensor& dy) {
  Tensor dx(x.n, x.c, x.h, x.w);
  for (std::size_t i = 0; i < dy.size(); ++i) {
    if (argmax[i] >= 0) dx.data[static_cast<std::size_t>(argmax[i])] += dy.data[i];
  }
  return dx;
}

Tensor global_avg_pool_forward(const Tensor& x) {
  Tensor y(x.n, x.c, 1, 1);
  const double inv = 1.0 / static_cast<double>(x.plane());
  for (int b = 0; b < x.n; ++b) {
    for (int c = 0; c < x.c; ++c) {
      double acc = 0.0;
      for (float v : x.channel(b, c)) acc += v;
      y.at(b, c, 0, 0) = static_cast<float>(acc * inv);
    }
  }
  return y;
}

Tensor global_avg_pool_backward(const Tensor& x, const Tensor& dy) {
  Tensor dx(x.n, x.c, x.h, x.w);
  const float inv = 1.0f / static_cast<float>(x.plane());
  for (int b = 0; b < x.n; ++b) {
    for (int c = 0; c < x.c; ++c) {
      const float g = dy.at(b, c, 0, 0) * inv;
      for (float& v : dx.channel(b, c)) v = g;
    }
  }
  return dx;
}

Tensor relu_forward(const Tensor& x, const Tensor* shortcut) {
  Tensor y = x;
  if (shortcut != nullptr) {
    require(shortcut->same_shape(x), "residual add: shape mismatch " + x.shape_str() + " vs " +
                                         shortcut->shape_str());
    for (std::size_t i = 0; i < y.size(); ++i) y.data[i] += shortcut->data[i];
  }
  for (float& v : y.data) v = std::max(v, 0.0f);
  return y;
}

Tensor relu_backward(const Tensor& y, const Tensor& dy) {
  Tensor dx = dy;
  for (std::size_t i = 0; i < dx.size(); ++i) {
    if (y.data[i] <= 0.0f) dx.data[i] = 0.0f;
  }
  return dx;
}

}  // namespace lreid::ops
