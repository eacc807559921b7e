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
#include <string>
#include <vector>

#include "lreid/backbone.hpp"
#include "lreid/container.hpp"
#include "lreid/datasets.hpp"
#include "lreid/domain_bank.hpp"
#include "lreid/eval_retrieval.hpp"
#include "lreid/kd_baseline.hpp"
#include "lreid/train_engine.hpp"

namespace lreid {

enum class Method { dasa, kd, finetune };
Method parse_method(const std::string& name);
std::string to_string(Method method);

struct SequenceOptions {
  Method method = Method::dasa;
  std::string arch = "tiny";
  TrainConfig train;
  int kernel_size = kDefaultSaKernel;
  std::string sa_placement = "all";
  Metric metric = Metric::cosine;
  KdConfig kd;
  int exemplar_ids = 250;
  int exemplar_images = 2;
  const NamedArrays* pretrained = nullptr;  // He-normal convs when null
  std::uint64_t init_seed = 0;
  EpochLogger log;
};

struct StepRecord {
  int step = 0;  // 1-based
  std::string domain;
  std::vector<DomainEval> seen;
  SeenAverage average;
};

struct SequenceState {
  Network network;
  Bank bank;                       // dasa only
  std::optional<ClassifierHead> head;  // kd / finetune
  ExemplarBuffer buffer;           // kd only
  std::vector<StepRecord> steps;
};

using StepCallback = std::function<void(const SequenceState&, const StepRecord&)>;

/// Trains the domains in order and evaluates every seen domain after each step.
SequenceState run_sequence(const std::vector<DatasetSpec>& domains, const SequenceOptions& options,
                           const StepCallback& on_step = {});

/// Trains the whole network (convs included) on one dataset and returns its
/// weights; stands in for a pre-trained backbone at desk scale.
NamedArrays pretrain_backbone(const std::string& arch, const DatasetSpec& dataset,
                              const TrainConfig& config, std::uint64_t init_seed,
                              const EpochLogger& log = {});

}  // namespace lreid
