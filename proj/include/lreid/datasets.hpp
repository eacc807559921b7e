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

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lreid/tensor.hpp"

namespace lreid {

/// 8-bit RGB image, row-major H x W x 3.
struct Image {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> pixels;

  Image() = default;
  Image(int h, int w, std::uint8_t fill = 0)
      : height(h), width(w), pixels(static_cast<std::size_t>(h) * w * 3, fill) {}

  std::uint8_t& at(int y, int x, int ch) {
    return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + ch];
  }
  std::uint8_t at(int y, int x, int ch) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + ch];
  }
  bool operator==(const Image&) const = default;
};

/// Non-positive height or width keeps the stored size.
Image read_image(const std::string& path, int height, int width);
void write_image(const std::string& path, const Image& image);
/// Writes an H x W map in [0,1] as 8-bit grayscale.
void write_heatmap(const std::string& path, const std::vector<float>& map, int height, int width);

/// Stacks images into an N x 3 x H x W tensor with per-channel mean/std
/// normalization (ImageNet statistics).
Tensor to_tensor(std::span<const Image* const> images);
Tensor to_tensor(const std::vector<Image>& images);

struct ImageRecord {
  std::string path;      // empty for in-memory synthetic images
  int identity = 0;      // identity as named by the source
  int label = 0;         // contiguous 1-based label within its split
  std::string camera;    // "<dataset>:c<n>", unique per dataset
  Image image;
};

struct DatasetSpec {
  std::string name;
  std::vector<ImageRecord> train;
  std::vector<ImageRecord> query;
  std::vector<ImageRecord> gallery;
  std::vector<std::string> warnings;

  int train_id_count() const;
  std::vector<std::string> cameras() const;
  std::vector<int> train_labels() const;
  /// Throws when train and test identities overlap.
  void validate() const;
};

/// Parses "<identity>_c<camera>..." (e.g. "0042_c3_000151.jpg").
struct ParsedName {
  int identity = 0;
  int camera = 0;
};
std::optional<ParsedName> parse_reid_filename(const std::string& filename);

/// Reads root/{train,query,gallery}. Missing train is allowed (test-only
/// dataset); malformed names are skipped and reported in warnings.
DatasetSpec load_reid_directory(const std::string& root);
/// CSV ingest: split,path,identity,camera per line (paths relative to the manifest).
DatasetSpec load_manifest(const std::string& csv_path, const std::string& name);
/// Loads and resizes every record's pixels.
void load_pixels(DatasetSpec& spec, int height, int width);
/// Writes images as PNG under root/<name>/<split>/ plus manifest.csv.
void write_dataset(const DatasetSpec& spec, const std::string& root);

struct SynthConfig {
  int domains = 3;
  int ids_per_domain = 20;
  int images_per_id = 8;
  int cameras_per_domain = 2;
  std::uint64_t seed = 0;
  int height = 32;
  int width = 16;
  double domain_margin = 0.1;  // min pairwise L-inf gap of per-domain channel means
};

/// Procedural pedestrians: per-identity clothing colors and patterns, a
/// per-domain photometric transform and mild per-camera jitter. Train and
/// test identities are disjoint; each test identity contributes one query
/// per camera, the rest go to the gallery.
std::vector<DatasetSpec> synth_generate(const SynthConfig& config);
/// Mean RGB over every image of the dataset, in [0,1] units.
std::array<double, 3> channel_means(const DatasetSpec& spec);

struct SequenceStep {
  std::string dataset;
  int decay_epoch = 10;
};
struct SequenceOrder {
  std::string name;
  std::vector<SequenceStep> steps;
};
/// "order1", "order2", or a comma-separated list of dataset names.
SequenceOrder sequence_config(const std::string& order);

}  // namespace lreid
