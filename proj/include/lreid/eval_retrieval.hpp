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

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lreid/backbone.hpp"
#include "lreid/datasets.hpp"
#include "lreid/domain_bank.hpp"

namespace lreid {

enum class Metric { cosine, euclidean };
Metric parse_metric(const std::string& name);

/// Row-major q x g distance matrix for q x d and g x d feature rows.
/// Cosine distance is 1 - cos; a zero-norm row is an error under cosine.
std::vector<double> pairwise_distance(std::span<const float> query, int q,
                                      std::span<const float> gallery, int g, int dim,
                                      Metric metric = Metric::cosine);

/// Mean of precision@rank over relevant hits. nullopt when nothing is relevant;
/// throws on an empty ranking.
std::optional<double> average_precision(const std::vector<bool>& ranking);

/// CMC(k) over queries' relevance rankings (queries with no hit contribute 0).
std::vector<double> cmc_curve(const std::vector<std::vector<bool>>& rankings, int max_rank);

struct LabeledFeatures {
  std::vector<float> features;  // n x dim
  int dim = 0;
  std::vector<int> identities;
  std::vector<std::string> cameras;
  int size() const { return static_cast<int>(identities.size()); }
};

struct RetrievalResult {
  double mAP = 0.0;
  std::vector<double> cmc;
  int valid_queries = 0;
  int skipped_queries = 0;
  double rank1() const { return cmc.empty() ? 0.0 : cmc.front(); }
};

/// Cross-camera protocol: gallery rows sharing identity and camera with the
/// query are dropped before ranking; ties keep gallery order.
RetrievalResult evaluate_retrieval(const LabeledFeatures& query, const LabeledFeatures& gallery,
                                   Metric metric = Metric::cosine, int max_rank = 50);

/// Eval-mode features for records. With a bank, each record uses the snapshot
/// chosen from its camera (or the override); without one the live state is used.
LabeledFeatures extract_record_features(Network& network, const std::vector<ImageRecord>& records,
                                        const Bank* bank, const SnapshotQuery& override_query = {},
                                        int batch_size = 64);

struct DomainEval {
  std::string domain;
  std::vector<int> snapshots_used;  // ordinals, empty for a single model
  RetrievalResult result;
};

DomainEval evaluate_domain(Network& network, const Bank* bank, const DatasetSpec& dataset,
                           Metric metric = Metric::cosine, const SnapshotQuery& override_query = {});

struct SeenAverage {
  double mAP = 0.0;
  double rank1 = 0.0;
};
SeenAverage average_seen(std::span<const DomainEval> reports);

struct EvalReport {
  std::vector<DomainEval> domains;
  SeenAverage average;
  std::string storage_ref;
};
std::string to_json(const EvalReport& report);

/// Channel-wise L2 norm of the last stage activation, bilinearly resized to the
/// input size and min-max normalized to [0,1] (all zeros for a flat map).
std::vector<float> attention_map(const Network& network, const Image& image);

}  // namespace lreid
