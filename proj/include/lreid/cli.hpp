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
#include <ostream>
#include <string>
#include <vector>

#include "lreid/sequence.hpp"

namespace lreid::cli {

struct SynthOptions {
  std::string out;
  SynthConfig config;
};
int cmd_synth(const SynthOptions& o, std::ostream& log);

struct TrainSequenceOptions {
  std::string config;  // JSON file; optional
  std::optional<std::string> order;
  std::optional<std::string> method;
  std::optional<std::uint64_t> seed;
  std::string out = "run";
  std::optional<std::string> data_root;
  std::optional<int> kernel_size;
  std::optional<std::string> sa_placement;
  std::optional<std::string> metric;
  std::optional<std::string> arch;
  std::optional<std::string> pretrained;  // weight container path
};
int cmd_train_sequence(const TrainSequenceOptions& o, std::ostream& log);

struct PretrainOptions {
  std::string config;
  std::string dataset;  // dataset directory
  std::string out;      // weight file
  std::string arch = "tiny";
  std::optional<std::uint64_t> seed;
};
int cmd_pretrain(const PretrainOptions& o, std::ostream& log);

struct EvalOptions {
  std::optional<std::string> bank;   // DASA artifact directory
  std::optional<std::string> model;  // KD / fine-tune artifact directory
  std::vector<std::string> datasets;
  std::optional<int> domain;
  std::string metric = "cosine";
  std::optional<std::string> out;
};
int cmd_eval(const EvalOptions& o, std::ostream& log);

struct StorageOptions {
  std::optional<std::string> bank;
  std::string arch = "resnet50";
  int domains = 4;
  int kernel_size = kDefaultSaKernel;
  std::string sa_placement = "all";
  std::int64_t classes = 8026;
  ExemplarPolicy exemplars;
};
int cmd_report_storage(const StorageOptions& o, std::ostream& log);

struct HeatmapOptions {
  std::optional<std::string> bank;
  std::optional<std::string> model;
  std::vector<std::string> images;
  std::optional<int> domain;
  std::string out = "heatmaps";
};
int cmd_heatmap(const HeatmapOptions& o, std::ostream& log);

/// Loads a dataset directory (train/query/gallery or manifest.csv) and its pixels.
DatasetSpec load_dataset(const std::string& path, int height, int width);

/// Mean mAP / Rank-1 per step as a small standalone SVG. Returns false on failure.
bool render_curve_svg(const std::vector<StepRecord>& steps, const std::string& path);

}  // namespace lreid::cli
