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

#include "lreid/eval_retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "json.hpp"

namespace lreid {

Metric parse_metric(const std::string& name) {
  if (name == "cosine") return Metric::cosine;
  if (name == "euclidean") return Metric::euclidean;
  throw std::invalid_argument("unknown metric '" + name + "' (cosine or euclidean)");
}

std::vector<double> pairwise_distance(std::span<const float> query, int q,
                                      std::span<const float> gallery, int g, int dim,
                                      Metric metric) {
  require(query.size() == static_cast<std::size_t>(q) * dim &&
              gallery.size() == static_cast<std::size_t>(g) * dim,
          "pairwise_distance: feature dimensions do not match");
  auto norms = [dim](std::span<const float> rows, int n) {
    std::vector<double> out(n);
    for (int i = 0; i < n; ++i) {
      double s = 0.0;
      for (int d = 0; d < dim; ++d) {
        const double v = rows[static_cast<std::size_t>(i) * dim + d];
        s += v * v;
      }
      out[i] = std::sqrt(s);
    }
    return out;
  };
  const auto qn = norms(query, q);
  const auto gn = norms(gallery, g);
  if (metric == Metric::cosine) {
    for (double n : qn) require(n > 0.0, "cosine distance: zero-norm query feature");
    for (double n : gn) require(n > 0.0, "cosine distance: zero-norm gallery feature");
  }
  std::vector<double> out(static_cast<std::size_t>(q) * g);
  for (int i = 0; i < q; ++i) {
    const float* a = query.data() + static_cast<std::size_t>(i) * dim;
    for (int j = 0; j < g; ++j) {
      const float* b = gallery.data() + static_cast<std::size_t>(j) * dim;
      double v = 0.0;
      if (metric == Metric::cosine) {
        for (int d = 0; d < dim; ++d) v += static_cast<double>(a[d]) * b[d];
        v = 1.0 - v / (qn[i] * gn[j]);
      } else {
        for (int d = 0; d < dim; ++d) {
          const double diff = static_cast<double>(a[d]) - b[d];
          v += diff * diff;
        }
        v = std::sqrt(v);
      }
      out[static_cast<std::size_t>(i) * g + j] = v;
    }
  }
  return out;
}

std::optional<double> average_precision(const std::vector<bool>& ranking) {
  require(!ranking.empty(), "average_precision: empty ranking");
  double sum = 0.0;
  int hits = 0;
  for (std::size_t r = 0; r < ranking.size(); ++r) {
    if (!ranking[r]) continue;
    ++hits;
    sum += static_cast<double>(hits) / static_cast<double>(r + 1);
  }
  if (hits == 0) return std::nullopt;
  return sum / hits;
}

std::vector<double> cmc_curve(const std::vector<std::vector<bool>>& rankings, int max_rank) {
  std::vector<double> cmc(static_cast<std::size_t>(max_rank), 0.0);
  if (rankings.empty()) return cmc;
  for (const auto& r : rankings) {
    const auto it = std::find(r.begin(), r.end(), true);
    if (it == r.end()) continue;
    const auto first = static_cast<int>(it - r.begin());
    for (int k = first; k < max_rank; ++k) cmc[k] += 1.0;
  }
  for (auto& v : cmc) v /= static_cast<double>(rankings.size());
  return cmc;
}

RetrievalResult evaluate_retrieval(const LabeledFeatures& query, const LabeledFeatures& gallery,
                                   Metric metric, int max_rank) {
  require(query.dim == gallery.dim, "query/gallery feature dimensions differ");
  const int q = query.size();
  const int g = gallery.size();
  RetrievalResult res;
  if (q == 0 || g == 0) {
    res.skipped_queries = q;
    res.cmc.assign(max_rank, 0.0);
    return res;
  }
  const auto dist = pairwise_distance(query.features, q, gallery.features, g, query.dim, metric);
  std::vector<std::vector<bool>> rankings;
  double ap_sum = 0.0;
  std::vector<int> order(g);
  for (int i = 0; i < q; ++i) {
    std::iota(order.begin(), order.end(), 0);
    const double* row = dist.data() + static_cast<std::size_t>(i) * g;
    std::stable_sort(order.begin(), order.end(), [row](int a, int b) { return row[a] < row[b]; });
    std::vector<bool> ranking;
    ranking.reserve(g);
    for (int j : order) {
      const bool same_id = gallery.identities[j] == query.identities[i];
      if (same_id && gallery.cameras[j] == query.cameras[i]) continue;  // junk
      ranking.push_back(same_id);
    }
    if (ranking.empty()) {
      ++res.skipped_queries;
      continue;
    }
    const auto ap = average_precision(ranking);
    if (!ap) {
      ++res.skipped_queries;
      continue;
    }
    ap_sum += *ap;
    rankings.push_back(std::move(ranking));
  }
  res.valid_queries = static_cast<int>(rankings.size());
  res.mAP = res.valid_queries ? ap_sum / res.valid_queries : 0.0;
  res.cmc = cmc_curve(rankings, max_rank);
  return res;
}

LabeledFeatures extract_record_features(Network& network, const std::vector<ImageRecord>& records,
                                        const Bank* bank, const SnapshotQuery& override_query,
                                        int batch_size) {
  LabeledFeatures out;
  out.dim = network.graph().feature_dim;
  out.features.assign(records.size() * static_cast<std::size_t>(out.dim), 0.0f);
  for (const auto& r : records) {
    out.identities.push_back(r.identity);
    out.cameras.push_back(r.camera);
  }
  // Group rows by the snapshot that serves them.
  std::map<int, std::vector<int>> groups;
  for (std::size_t i = 0; i < records.size(); ++i) {
    int ordinal = 0;
    if (bank != nullptr) {
      SnapshotQuery q = override_query;
      q.camera_id = records[i].camera;
      ordinal = select_snapshot(*bank, q).ordinal;
    }
    groups[ordinal].push_back(static_cast<int>(i));
  }
  for (const auto& [ordinal, rows] : groups) {
    if (bank != nullptr) network.apply(*bank->find_ordinal(ordinal));
    for (std::size_t s = 0; s < rows.size(); s += static_cast<std::size_t>(batch_size)) {
      const std::size_t e = std::min(rows.size(), s + static_cast<std::size_t>(batch_size));
      std::vector<const Image*> imgs;
      for (std::size_t k = s; k < e; ++k) imgs.push_back(&records[rows[k]].image);
      const Tensor f = network.forward_eval(to_tensor(imgs));
      for (std::size_t k = s; k < e; ++k) {
        std::copy_n(f.data.begin() + static_cast<std::ptrdiff_t>((k - s) * out.dim), out.dim,
                    out.features.begin() + static_cast<std::ptrdiff_t>(rows[k]) * out.dim);
      }
    }
  }
  return out;
}

DomainEval evaluate_domain(Network& network, const Bank* bank, const DatasetSpec& dataset,
                           Metric metric, const SnapshotQuery& override_query) {
  DomainEval ev;
  ev.domain = dataset.name;
  if (bank != nullptr) {
    std::set<int> used;
    for (const auto* split : {&dataset.query, &dataset.gallery}) {
      for (const auto& r : *split) {
        SnapshotQuery q = override_query;
        q.camera_id = r.camera;
        used.insert(select_snapshot(*bank, q).ordinal);
      }
    }
    ev.snapshots_used.assign(used.begin(), used.end());
  }
  const auto qf = extract_record_features(network, dataset.query, bank, override_query);
  const auto gf = extract_record_features(network, dataset.gallery, bank, override_query);
  ev.result = evaluate_retrieval(qf, gf, metric);
  return ev;
}

SeenAverage average_seen(std::span<const DomainEval> reports) {
  require(!reports.empty(), "average_seen needs at least one report");
  SeenAverage a;
  for (const auto& r : reports) {
    a.mAP += r.result.mAP;
    a.rank1 += r.result.rank1();
  }
  a.mAP /= static_cast<double>(reports.size());
  a.rank1 /= static_cast<double>(reports.size());
  return a;
}

std::string to_json(const EvalReport& report) {
  nlohmann::json j;
  j["domains"] = nlohmann::json::array();
  for (const auto& d : report.domains) {
    const std::size_t shown = std::min<std::size_t>(d.result.cmc.size(), 20);
    j["domains"].push_back({{"domain", d.domain},
                            {"snapshots_used", d.snapshots_used},
                            {"mAP", d.result.mAP},
                            {"rank1", d.result.rank1()},
                            {"cmc", std::vector<double>(d.result.cmc.begin(),
                                                        d.result.cmc.begin() +
                                                            static_cast<std::ptrdiff_t>(shown))},
                            {"valid_queries", d.result.valid_queries},
                            {"skipped_queries", d.result.skipped_queries}});
  }
  j["average_seen"] = {{"mAP", report.average.mAP}, {"rank1", report.average.rank1}};
  if (!report.storage_ref.empty()) j["storage"] = report.storage_ref;
  return j.dump(2);
}

std::vector<float> attention_map(const Network& network, const Image& image) {
  ForwardTrace trace;
  network.forward_eval(to_tensor(std::vector<Image>{image}), &trace);
  const Tensor& act = trace.outputs.at(network.graph().last_stage_activation());
  const int ah = act.h;
  const int aw = act.w;
  std::vector<double> norm(static_cast<std::size_t>(ah) * aw, 0.0);
  for (int c = 0; c < act.c; ++c) {
    auto plane = act.channel(0, c);
    for (std::size_t i = 0; i < plane.size(); ++i) norm[i] += static_cast<double>(plane[i]) * plane[i];
  }
  for (auto& v : norm) v = std::sqrt(v);

  const int h = image.height;
  const int w = image.width;
  std::vector<float> map(static_cast<std::size_t>(h) * w);
  const double sy = static_cast<double>(ah) / h;
  const double sx = static_cast<double>(aw) / w;
  for (int y = 0; y < h; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(ah - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, ah - 1);
    const double ty = fy - y0;
    for (int x = 0; x < w; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(aw - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, aw - 1);
      const double tx = fx - x0;
      const double top = norm[y0 * aw + x0] * (1 - tx) + norm[y0 * aw + x1] * tx;
      const double bot = norm[y1 * aw + x0] * (1 - tx) + norm[y1 * aw + x1] * tx;
      map[static_cast<std::size_t>(y) * w + x] = static_cast<float>(top * (1 - ty) + bot * ty);
    }
  }
  const auto [lo, hi] = std::minmax_element(map.begin(), map.end());
  const float min_v = *lo;
  const float range = *hi - *lo;
  for (auto& v : map) v = range > 1e-12f ? (v - min_v) / range : 0.0f;
  return map;
}

}  // namespace lreid
