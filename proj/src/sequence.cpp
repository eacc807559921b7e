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

#include "lreid/sequence.hpp"

namespace lreid {

Method parse_method(const std::string& name) {
  if (name == "dasa") return Method::dasa;
  if (name == "kd") return Method::kd;
  if (name == "finetune") return Method::finetune;
  throw std::invalid_argument("unknown method '" + name + "' (dasa, kd or finetune)");
}

std::string to_string(Method method) {
  switch (method) {
    case Method::dasa: return "dasa";
    case Method::kd: return "kd";
    case Method::finetune: return "finetune";
  }
  return "?";
}

namespace {

Network make_network(const SequenceOptions& o) {
  auto built = build_and_partition(o.arch, o.pretrained, o.init_seed);
  return std::move(built.network);
}

}  // namespace

SequenceState run_sequence(const std::vector<DatasetSpec>& domains, const SequenceOptions& o,
                           const StepCallback& on_step) {
  require(!domains.empty(), "sequence has no domains");
  SequenceState st{make_network(o), Bank(std::string(o.arch)), std::nullopt, {}, {}};
  st.buffer.ids_per_step = o.exemplar_ids;
  st.buffer.images_per_id = o.exemplar_images;

  KdModel kd_model{st.network, ClassifierHead{}};
  if (o.method == Method::dasa) {
    st.network.insert_sa(SaPlacement::parse(o.sa_placement), o.kernel_size);
  }
  KdConfig kd = o.kd;
  if (o.method == Method::finetune) {
    kd.replay = false;
    kd.lambda_kd = 0.0;
  }

  for (std::size_t t = 0; t < domains.size(); ++t) {
    const auto& ds = domains[t];
    const int ordinal = static_cast<int>(t) + 1;
    StepRecord rec;
    rec.step = ordinal;
    rec.domain = ds.name;
    if (o.method == Method::dasa) {
      forward_transfer_init(st.bank, st.network);
      auto run = train_domain(st.network, ds, st.bank, o.train, o.log);
      st.bank.add(std::move(run.snapshot));
      for (std::size_t i = 0; i <= t; ++i) {
        rec.seen.push_back(evaluate_domain(st.network, &st.bank, domains[i], o.metric));
      }
    } else {
      train_domain_kd(kd_model, ds, st.buffer, o.train, kd, ordinal, o.log);
      for (std::size_t i = 0; i <= t; ++i) {
        rec.seen.push_back(evaluate_domain(kd_model.network, nullptr, domains[i], o.metric));
      }
      st.network = kd_model.network;
      st.head = kd_model.head;
    }
    rec.average = average_seen(rec.seen);
    st.steps.push_back(rec);
    if (on_step) on_step(st, st.steps.back());
  }
  return st;
}

NamedArrays pretrain_backbone(const std::string& arch, const DatasetSpec& dataset,
                              const TrainConfig& config, std::uint64_t init_seed,
                              const EpochLogger& log) {
  KdModel model{build_and_partition(arch, nullptr, init_seed).network, ClassifierHead{}};
  ExemplarBuffer unused;
  KdConfig plain;
  plain.replay = false;
  plain.lambda_kd = 0.0;
  train_domain_kd(model, dataset, unused, config, plain, 1, log);
  return model.network.export_weights();
}

}  // namespace lreid
