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
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "lreid/backbone.hpp"
#include "lreid/datasets.hpp"
#include "lreid/domain_bank.hpp"

namespace lreid {

struct AugmentFlags {
  bool flip = true;
  bool pad_crop = true;
  bool erase = true;
  int pad = 10;
  double flip_prob = 0.5;
  double erase_prob = 0.5;
  double erase_area_min = 0.02;
  double erase_area_max = 0.4;
  double erase_aspect_min = 0.3;

  static AugmentFlags none() { return {false, false, false}; }
};

struct TrainConfig {
  int batch_size = 128;
  int instances_per_id = 2;
  int epochs = 80;
  double base_lr = 3.5e-4;
  double warmup_start_lr = 3.5e-5;
  int warmup_epochs = 10;
  int first_decay_epoch = 30;
  int later_decay_epoch = 10;
  double decay_factor = 0.1;
  double weight_decay = 5e-4;
  double label_smoothing = 0.1;
  int input_height = 256;
  int input_width = 128;
  AugmentFlags augment;
  std::uint64_t seed = 0;

  /// Throws when batch_size % K != 0 or a decay epoch precedes warmup end.
  void validate() const;
};

/// Reads a JSON config; absent keys keep their defaults. Sections: "train",
/// "augment".
TrainConfig load_train_config(const std::string& path);
TrainConfig parse_train_config(const std::string& json_text);

// ---------------------------------------------------------------------------
// Sampling and augmentation

/// P identities x K instances per batch, P = batch_size / K. Identities with
/// fewer than K images are drawn with replacement.
struct PkEpoch {
  std::vector<std::vector<int>> batches;
  std::optional<std::string> warning;
};
PkEpoch pk_sample_epoch(std::span<const int> labels, int batch_size, int instances_per_id,
                        std::mt19937_64& rng);

struct AugmentTrace {
  bool flipped = false;
  int crop_y = 0;
  int crop_x = 0;
  bool erased = false;
  int erase_y = 0, erase_x = 0, erase_h = 0, erase_w = 0;
};
Image augment(const Image& image, const AugmentFlags& flags, std::mt19937_64& rng,
              AugmentTrace* trace = nullptr);

// ---------------------------------------------------------------------------
// Loss and schedule

struct ClassifierHead {
  int classes = 0;
  int dim = 0;
  std::vector<float> weights;  // classes x dim, no bias

  static ClassifierHead random(int classes, int dim, std::uint64_t seed);
  /// B x classes logits for B x dim features.
  std::vector<double> logits(const Tensor& features) const;
};

struct LossResult {
  double loss = 0.0;
  std::vector<double> dlogits;  // B x N
};

/// Mean softmax cross-entropy with label smoothing; labels are 1-based.
LossResult softmax_cross_entropy(std::span<const double> logits, int batch, int classes,
                                 std::span<const int> labels, double smoothing);

struct IdLossResult {
  double loss = 0.0;
  int correct = 0;
  Tensor dfeatures;
  std::vector<float> dweights;
};
IdLossResult id_loss(const Tensor& features, const ClassifierHead& head,
                     std::span<const int> labels, double smoothing);

double lr_at_epoch(int epoch, const TrainConfig& config, bool is_first_domain);

/// Adam with L2 weight decay folded into the gradient.
class Adam {
 public:
  Adam(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : beta1_(beta1), beta2_(beta2), eps_(eps) {}
  void step(std::span<const ParamView> params, double lr, double weight_decay);
  std::size_t state_size() const { return m_.size(); }
  std::int64_t steps() const { return t_; }

 private:
  double beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

// ---------------------------------------------------------------------------
// Per-domain training

struct EpochMetrics {
  std::string domain;
  int epoch = 0;
  double lr = 0.0;
  double loss = 0.0;
  double accuracy = 0.0;
};
using EpochLogger = std::function<void(const EpochMetrics&)>;
/// JSON line for the metrics log.
std::string to_json_line(const EpochMetrics& m);

/// Gathers, augments and stacks a batch of training images.
Tensor make_batch(const std::vector<const Image*>& images, const AugmentFlags& flags, bool train,
                  std::mt19937_64& rng);

struct DomainRun {
  DomainSnapshot snapshot;
  std::vector<EpochMetrics> history;
  std::int64_t optimizer_params = 0;  // values handed to the optimizer
};

/// Tunes BN affines, SA kernels, the neck and a fresh classifier on one domain
/// with frozen convs, then captures the snapshot (ordinal bank.size()+1). The
/// classifier is dropped afterwards. Expects forward_transfer_init to have run.
DomainRun train_domain(Network& network, const DatasetSpec& dataset, const Bank& bank,
                       const TrainConfig& config, const EpochLogger& log = {});

}  // namespace lreid
