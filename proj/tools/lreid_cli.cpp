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

#include <iostream>

#include "CLI11.hpp"
#include "lreid/cli.hpp"

using namespace lreid;

int main(int argc, char** argv) {
  CLI::App app{"lreid: lifelong person re-identification with per-domain BN and SA adapters"};
  app.require_subcommand(1);

  cli::SynthOptions synth;
  auto* s = app.add_subcommand("synth", "Generate synthetic re-ID domains");
  s->add_option("--out", synth.out, "Output root")->required();
  s->add_option("--domains", synth.config.domains);
  s->add_option("--ids", synth.config.ids_per_domain, "Identities per domain");
  s->add_option("--images", synth.config.images_per_id, "Images per identity");
  s->add_option("--cameras", synth.config.cameras_per_domain);
  s->add_option("--seed", synth.config.seed);
  s->add_option("--height", synth.config.height);
  s->add_option("--width", synth.config.width);
  s->add_option("--margin", synth.config.domain_margin, "Minimum gap between domain channel means");

  cli::PretrainOptions pre;
  auto* p = app.add_subcommand("pretrain", "Train a full backbone on one dataset and save its weights");
  p->add_option("--config", pre.config);
  p->add_option("--dataset", pre.dataset)->required();
  p->add_option("--out", pre.out)->required();
  p->add_option("--arch", pre.arch);
  p->add_option("--seed", pre.seed);

  cli::TrainSequenceOptions ts;
  auto* t = app.add_subcommand("train-sequence", "Train over a domain sequence");
  t->add_option("--config", ts.config, "JSON config (train, augment, sequence sections)");
  t->add_option("--order", ts.order, "order1, order2 or a comma-separated dataset list");
  t->add_option("--method", ts.method)->check(CLI::IsMember({"dasa", "kd", "finetune"}));
  t->add_option("--seed", ts.seed);
  t->add_option("--out", ts.out);
  t->add_option("--data-root", ts.data_root);
  t->add_option("--kernel-size", ts.kernel_size);
  t->add_option("--sa-placement", ts.sa_placement, "all, none, stages:<list> or conv:<list>");
  t->add_option("--metric", ts.metric)->check(CLI::IsMember({"cosine", "euclidean"}));
  t->add_option("--arch", ts.arch);
  t->add_option("--pretrained", ts.pretrained, "Backbone weight file");

  cli::EvalOptions ev;
  auto* e = app.add_subcommand("eval", "Evaluate a bank or model on datasets");
  e->add_option("--bank", ev.bank);
  e->add_option("--model", ev.model);
  e->add_option("--dataset", ev.datasets)->required();
  e->add_option("--domain", ev.domain, "Force the snapshot of this training step");
  e->add_option("--metric", ev.metric)->check(CLI::IsMember({"cosine", "euclidean"}));
  e->add_option("--out", ev.out, "Write the report as JSON");

  cli::StorageOptions st;
  auto* r = app.add_subcommand("report-storage", "Print the storage table");
  r->add_option("--bank", st.bank);
  r->add_option("--arch", st.arch);
  r->add_option("--domains", st.domains);
  r->add_option("--kernel-size", st.kernel_size);
  r->add_option("--sa-placement", st.sa_placement);
  r->add_option("--classes", st.classes, "Classifier rows of the KD baseline");
  r->add_option("--exemplar-ids", st.exemplars.ids_per_step);
  r->add_option("--exemplar-images", st.exemplars.images_per_id);
  r->add_option("--exemplar-height", st.exemplars.height);
  r->add_option("--exemplar-width", st.exemplars.width);

  cli::HeatmapOptions hm;
  auto* h = app.add_subcommand("heatmap", "Write activation heat maps");
  h->add_option("--bank", hm.bank);
  h->add_option("--model", hm.model);
  h->add_option("--image", hm.images)->required();
  h->add_option("--domain", hm.domain);
  h->add_option("--out", hm.out);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*s) return cli::cmd_synth(synth, std::cout);
    if (*p) return cli::cmd_pretrain(pre, std::cout);
    if (*t) return cli::cmd_train_sequence(ts, std::cout);
    if (*e) return cli::cmd_eval(ev, std::cout);
    if (*r) return cli::cmd_report_storage(st, std::cout);
    if (*h) return cli::cmd_heatmap(hm, std::cout);
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  }
  return 1;
}
