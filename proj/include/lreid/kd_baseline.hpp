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
#include <span>
#include <string>
#include <vector>

#include "lreid/backbone.hpp"
#include "lreid/datasets.hpp"
#include "lreid/train_engine.hpp"

namespace lreid {

struct ExemplarEntry {
  Image image;
  int identity = 0;        // source identity
  int label = 0;           // 1-based row in the cumulative classifier
  int domain_ordinal = 0;  // 1-based step that contributed it
  std::string camera;
};

/// Rehearsal store for the KD baseline.
struct ExemplarBuffer {
  int ids_per_step = 250;
  int images_per_id = 2;
  std::vector<ExemplarEntry> entries;

  std::size_t size() const { return entries.size(); }
  bool empty() const { return entries.empty(); }
  /// Distinct identities kept for one step.
  int identity_count(int domain_ordinal) const;
  /// Raw 8-bit pixel bytes held.
  std::int64_t bytes() const;

  /// Directory of PNG images plus manifest.csv (path,identity,label,domain,camera).
  void save(const std::string& dir) const;
  static ExemplarBuffer load(const std::string& dir);
};

/// min(ids_per_step, n_id) random identities of the training split and
/// images_per_id random images each (fewer if the identity lacks them).
/// Labels become label_offset + local label.
std::vector<ExemplarEntry> select_exemplars(const DatasetSpec& dataset, int ids_per_step,
                                            int images_per_id, std::uint64_t seed,
                                            int domain_ordinal, int label_offset);

/// Appends one row per new class: the L2-normalized mean of its features.
/// features is n x d, labels are 1-based in [1, new_classes].
ClassifierHead expand_classifier(const ClassifierHead& old_head, const Tensor& features,
                                 std::span<const int> labels, int new_classes);
/// Same, with eval-mode student features of the dataset's training split.
ClassifierHead expand_classifier(const ClassifierHead& old_head, const DatasetSpec& dataset,
                                 const Network& student);

struct KdLossResult {
  double loss = 0.0;
  std::vector<double> dstudent;  // B x N
};
/// -(1/B) sum_b sum_k softmax(teacher)_bk * log softmax(student)_bk
KdLossResult kd_loss(std::span<const double> teacher_logits, std::span<const double> student_logits,
                     int batch, int classes);

struct FrozenTeacher {
  Network network;
  ClassifierHead head;
};

enum class KdHeadMode {
  expanded,     // teacher head carries the new class centers too; KD over N^(t) classes
  old_classes,  // KD over the first N^(t-1) rows of both heads
};

struct KdConfig {
  double lambda_kd = 1.0;
  bool replay = true;              // store and mix exemplars
  bool distill_new_samples = false;
  KdHeadMode head_mode = KdHeadMode::expanded;
};

/// Evolving single model of the KD and fine-tune baselines.
struct KdModel {
  Network network;
  ClassifierHead head;  // cumulative, empty before the first step
};

struct KdStepResult {
  std::vector<EpochMetrics> history;
  int exemplars_added = 0;
};

/// One step: snapshot a teacher, expand the head, train the whole model on the
/// new domain mixed with the buffer, then add this domain's exemplars.
/// Fine-tune is replay = false and lambda_kd = 0.
KdStepResult train_domain_kd(KdModel& model, const DatasetSpec& dataset, ExemplarBuffer& buffer,
                             const TrainConfig& config, const KdConfig& kd, int domain_ordinal,
                             const EpochLogger& log = {});

}  // namespace lreid
