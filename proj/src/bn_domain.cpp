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

#include "lreid/bn_domain.hpp"

#include <cmath>
#include <string>

namespace lreid {

BnLayerState BnLayerState::neutral(int channels) {
  BnLayerState s;
  s.running_mean.assign(channels, 0.0f);
  s.running_var.assign(channels, 1.0f);
  s.gamma.assign(channels, 1.0f);
  s.beta.assign(channels, 0.0f);
  return s;
}

void BnLayerState::validate() const {
  const std::size_t c = gamma.size();
  require(beta.size() == c && running_mean.size() == c && running_var.size() == c,
          "BN state vectors must share one length");
  require(eps > 0.0f, "BN eps must be positive");
  require(momentum > 0.0f && momentum < 1.0f, "BN momentum must lie in (0, 1)");
  for (std::size_t i = 0; i < c; ++i) {
    require(std::isfinite(running_mean[i]) && std::isfinite(running_var[i]) &&
                std::isfinite(gamma[i]) && std::isfinite(beta[i]),
            "BN state holds non-finite values");
    require(running_var[i] >= 0.0f, "BN running variance must be nonnegative");
  }
}

Tensor bn_forward_train(BnLayerState& state, const Tensor& x, BnTrainCache* cache) {
  require(x.c == state.channels(), "BN: channel mismatch (" + std::to_string(x.c) + " vs " +
                                       std::to_string(state.channels()) + ")");
  const std::size_t count = static_cast<std::size_t>(x.n) * x.plane();
  require(count >= 2, "BN train: reduction axis B*H*W must hold at least 2 elements");
  for (float v : x.data) require(std::isfinite(v), "BN train: non-finite input");

  const int channels = x.c;
  std::vector<float> mean(channels);
  std::vector<float> inv_std(channels);
  for (int c = 0; c < channels; ++c) {
    double sum = 0.0;
    for (int b = 0; b < x.n; ++b) {
      for (float v : x.channel(b, c)) sum += v;
    }
    const double mu = sum / static_cast<double>(count);
    double sq = 0.0;
    for (int b = 0; b < x.n; ++b) {
      for (float v : x.channel(b, c)) sq += (v - mu) * (v - mu);
    }
    const double var = sq / static_cast<double>(count);
    mean[c] = static_cast<float>(mu);
    inv_std[c] = static_cast<float>(1.0 / std::sqrt(var + state.eps));
    const float m = state.momentum;
    state.running_mean[c] = (1.0f - m) * state.running_mean[c] + m * static_cast<float>(mu);
    state.running_var[c] = (1.0f - m) * state.running_var[c] + m * static_cast<float>(var);
  }

  Tensor y(x.n, x.c, x.h, x.w);
  Tensor xhat(x.n, x.c, x.h, x.w);
  for (int b = 0; b < x.n; ++b) {
    for (int c = 0; c < channels; ++c) {
      auto in = x.channel(b, c);
      auto nrm = xhat.channel(b, c);
      auto out = y.channel(b, c);
      for (std::size_t i = 0; i < in.size(); ++i) {
        nrm[i] = (in[i] - mean[c]) * inv_std[c];
        out[i] = state.gamma[c] * nrm[i] + state.beta[c];
      }
    }
  }
  if (cache != nullptr) {
    cache->mean = std::move(mean);
    cache->inv_std = std::move(inv_std);
    cache->normalized = std::move(xhat);
  }
  return y;
}

Tensor bn_forward_eval(const BnLayerState& state, const Tensor& x) {
  require(x.c == state.channels(), "BN: channel mismatch (" + std::to_string(x.c) + " vs " +
                                       std::to_string(state.channels()) + ")");
  Tensor y(x.n, x.c, x.h, x.w);
  for (int c = 0; c < x.c; ++c) {
    require(std::isfinite(state.running_mean[c]) && std::isfinite(state.running_var[c]),
            "BN eval: non-finite stored statistics");
    const float scale = state.gamma[c] / std::sqrt(state.running_var[c] + state.eps);
    const float mu = state.running_mean[c];
    const float beta = state.beta[c];
    for (int b = 0; b < x.n; ++b) {
      auto in = x.channel(b, c);
      auto out = y.channel(b, c);
      for (std::size_t i = 0; i < in.size(); ++i) out[i] = scale * (in[i] - mu) + beta;
    }
  }
  return y;
}

Tensor bn_backward_train(const BnLayerState& state, const BnTrainCache& cache, const Tensor& dy,
                         std::span<float> dgamma, std::span<float> dbeta, bool need_input_grad) {
  const Tensor& xhat = cache.normalized;
  require(dy.same_shape(xhat), "BN backward: gradient shape mismatch");
  const double count = static_cast<double>(dy.n) * dy.plane();
  Tensor dx;
  if (need_input_grad) dx = Tensor(dy.n, dy.c, dy.h, dy.w);
  for (int c = 0; c < dy.c; ++c) {
    double sum_dy = 0.0;
    double sum_dy_xhat = 0.0;
    for (int b = 0; b < dy.n; ++b) {
      auto g = dy.channel(b, c);
      auto nrm = xhat.channel(b, c);
      for (std::size_t i = 0; i < g.size(); ++i) {
        sum_dy += g[i];
        sum_dy_xhat += g[i] * nrm[i];
      }
    }
    if (!dgamma.empty()) dgamma[c] += static_cast<float>(sum_dy_xhat);
    if (!dbeta.empty()) dbeta[c] += static_cast<float>(sum_dy);
    if (!need_input_grad) continue;
    const double k = state.gamma[c] * cache.inv_std[c];
    const double mean_dy = sum_dy / count;
    const double mean_dy_xhat = sum_dy_xhat / count;
    for (int b = 0; b < dy.n; ++b) {
      auto g = dy.channel(b, c);
      auto nrm = xhat.channel(b, c);
      auto out = dx.channel(b, c);
      for (std::size_t i = 0; i < g.size(); ++i) {
        out[i] = static_cast<float>(k * (g[i] - mean_dy - nrm[i] * mean_dy_xhat));
      }
    }
  }
  return dx;
}

}  // namespace lreid
