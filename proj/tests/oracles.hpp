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
// Independent reference implementations used by the unit and acceptance tests.
// They are written for clarity, not speed, and share no code with src/.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace oracle {

// Direct 7-loop cross-correlation in double. x: n x c x h x w, w: o x c x k x k.
inline std::vector<double> conv2d(const std::vector<double>& x, int n, int c, int h, int w,
                                  const std::vector<double>& wt, int o, int k, int stride, int pad,
                                  int& oh, int& ow) {
  oh = (h + 2 * pad - k) / stride + 1;
  ow = (w + 2 * pad - k) / stride + 1;
  std::vector<double> y(static_cast<std::size_t>(n) * o * oh * ow, 0.0);
  for (int b = 0; b < n; ++b)
    for (int oc = 0; oc < o; ++oc)
      for (int yy = 0; yy < oh; ++yy)
        for (int xx = 0; xx < ow; ++xx) {
          double acc = 0.0;
          for (int ic = 0; ic < c; ++ic)
            for (int ky = 0; ky < k; ++ky)
              for (int kx = 0; kx < k; ++kx) {
                const int iy = yy * stride - pad + ky;
                const int ix = xx * stride - pad + kx;
                if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
                acc += x[((static_cast<std::size_t>(b) * c + ic) * h + iy) * w + ix] *
                       wt[((static_cast<std::size_t>(oc) * c + ic) * k + ky) * k + kx];
              }
          y[((static_cast<std::size_t>(b) * o + oc) * oh + yy) * ow + xx] = acc;
        }
  return y;
}

// Central finite-difference gradient of f at x.
inline std::vector<double> numeric_grad(const std::function<double(const std::vector<double>&)>& f,
                                        std::vector<double> x, double h) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = f(x);
    x[i] = keep - h;
    const double down = f(x);
    x[i] = keep;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

// max |a-b| / max(1e-12, max |b|) style relative error over a vector.
inline double rel_error(const std::vector<double>& a, const std::vector<double>& b) {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num = std::max(num, std::abs(a[i] - b[i]));
    den = std::max(den, std::max(std::abs(a[i]), std::abs(b[i])));
  }
  return num / std::max(den, 1e-12);
}

inline std::vector<double> softmax(const std::vector<double>& z) {
  std::vector<double> p(z.size());
  const double m = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) s += (p[i] = std::exp(z[i] - m));
  for (auto& v : p) v /= s;
  return p;
}

// Cross-entropy between teacher and student distributions, averaged over rows.
inline double kd_cross_entropy(const std::vector<double>& t, const std::vector<double>& s, int b,
                               int n) {
  double total = 0.0;
  for (int i = 0; i < b; ++i) {
    const std::vector<double> tz(t.begin() + i * n, t.begin() + (i + 1) * n);
    const std::vector<double> sz(s.begin() + i * n, s.begin() + (i + 1) * n);
    const auto pt = softmax(tz);
    const auto ps = softmax(sz);
    for (int k = 0; k < n; ++k) total -= pt[k] * std::log(ps[k]);
  }
  return total / b;
}

inline double entropy(const std::vector<double>& p) {
  double e = 0.0;
  for (double v : p)
    if (v > 0) e -= v * std::log(v);
  return e;
}

// ---------------------------------------------------------------------------
// Retrieval: brute force from scratch.

struct Retrieval {
  double mAP = 0.0;
  std::vector<double> cmc;
  int valid = 0;
};

// AP via precision counted from scratch at every relevant position.
inline std::optional<double> ap(const std::vector<int>& rel) {
  int total = 0;
  for (int r : rel) total += r;
  if (total == 0) return std::nullopt;
  double s = 0.0;
  for (std::size_t i = 0; i < rel.size(); ++i) {
    if (!rel[i]) continue;
    int hits = 0;
    for (std::size_t j = 0; j <= i; ++j) hits += rel[j];
    s += static_cast<double>(hits) / static_cast<double>(i + 1);
  }
  return s / total;
}

// dist: q x g. Ties broken by gallery index. Same id + same camera is junk.
inline Retrieval retrieval(const std::vector<double>& dist, int q, int g,
                           const std::vector<int>& qid, const std::vector<int>& qcam,
                           const std::vector<int>& gid, const std::vector<int>& gcam, int max_rank) {
  Retrieval out;
  out.cmc.assign(max_rank, 0.0);
  double sum = 0.0;
  for (int i = 0; i < q; ++i) {
    std::vector<std::pair<double, int>> order;
    for (int j = 0; j < g; ++j) {
      if (gid[j] == qid[i] && gcam[j] == qcam[i]) continue;
      order.emplace_back(dist[static_cast<std::size_t>(i) * g + j], j);
    }
    std::sort(order.begin(), order.end());
    std::vector<int> rel;
    for (const auto& [d, j] : order) rel.push_back(gid[j] == qid[i] ? 1 : 0);
    const auto a = ap(rel);
    if (!a) continue;
    ++out.valid;
    sum += *a;
    int first = 0;
    while (!rel[first]) ++first;
    for (int k = first; k < max_rank; ++k) out.cmc[k] += 1.0;
  }
  if (out.valid > 0) {
    out.mAP = sum / out.valid;
    for (auto& v : out.cmc) v /= out.valid;
  }
  return out;
}

// ---------------------------------------------------------------------------
// ResNet-50 bottleneck enumeration: (stage, out_channels) per conv.

struct ConvShape {
  int stage;
  int in;
  int out;
  int k;
};

inline std::vector<ConvShape> resnet50_convs() {
  std::vector<ConvShape> v{{1, 3, 64, 7}};
  const int blocks[4] = {3, 4, 6, 3};
  const int widths[4] = {64, 128, 256, 512};
  int in = 64;
  for (int s = 0; s < 4; ++s) {
    const int wdt = widths[s];
    for (int b = 0; b < blocks[s]; ++b) {
      v.push_back({s + 1, in, wdt, 1});
      v.push_back({s + 1, wdt, wdt, 3});
      v.push_back({s + 1, wdt, wdt * 4, 1});
      if (b == 0) v.push_back({s + 1, in, wdt * 4, 1});
      in = wdt * 4;
    }
  }
  return v;
}

}  // namespace oracle
