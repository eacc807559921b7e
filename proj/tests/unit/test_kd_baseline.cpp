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

#include <cmath>
#include <filesystem>
#include <map>
#include <random>
#include <set>

#include "doctest.h"
#include "lreid/kd_baseline.hpp"
#include "oracles.hpp"

using namespace lreid;

TEST_CASE("kd_loss hand examples") {
  const std::vector<double> t{0.0, 0.0};
  const std::vector<double> s{std::log(3.0), 0.0};
  const double expected = -(0.5 * std::log(0.75) + 0.5 * std::log(0.25));
  CHECK(kd_loss(t, s, 1, 2).loss == doctest::Approx(expected).epsilon(1e-12));
  CHECK(std::abs(kd_loss(t, s, 1, 2).loss - 0.8370) < 1e-4);
  const std::vector<double> u(4, 1.7);
  CHECK(kd_loss(u, u, 1, 4).loss == doctest::Approx(std::log(4.0)));
}

TEST_CASE("kd_loss(p,p) is the mean softmax entropy; Gibbs lower bound") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> d(0.0, 3.0);
  for (int trial = 0; trial < 50; ++trial) {
    const int b = 1 + trial % 4, n = 2 + trial % 7;
    std::vector<double> p(b * n), q(b * n);
    for (auto& v : p) v = d(rng);
    for (auto& v : q) v = d(rng);
    double ent = 0.0;
    for (int i = 0; i < b; ++i)
      ent += oracle::entropy(oracle::softmax({p.begin() + i * n, p.begin() + (i + 1) * n}));
    ent /= b;
    CHECK(std::abs(kd_loss(p, p, b, n).loss - ent) < 1e-6);
    CHECK(kd_loss(p, q, b, n).loss >= ent - 1e-12);
    CHECK(kd_loss(p, q, b, n).loss == doctest::Approx(oracle::kd_cross_entropy(p, q, b, n)).epsilon(1e-10));
  }
}

TEST_CASE("kd_loss gradient: finite differences and closed form") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> d(0.0, 2.0);
  for (int trial = 0; trial < 50; ++trial) {
    const int b = 1 + trial % 3, n = 2 + trial % 5;
    std::vector<double> t(b * n), s(b * n);
    for (auto& v : t) v = d(rng);
    for (auto& v : s) v = d(rng);
    const auto r = kd_loss(t, s, b, n);
    const auto num = oracle::numeric_grad([&](const std::vector<double>& v) { return kd_loss(t, v, b, n).loss; }, s, 1e-5);
    CHECK(oracle::rel_error(r.dstudent, num) < 1e-4);
    for (int i = 0; i < b; ++i) {
      const auto pt = oracle::softmax({t.begin() + i * n, t.begin() + (i + 1) * n});
      const auto ps = oracle::softmax({s.begin() + i * n, s.begin() + (i + 1) * n});
      for (int k = 0; k < n; ++k) CHECK(r.dstudent[i * n + k] == doctest::Approx((ps[k] - pt[k]) / b).epsilon(1e-9));
    }
  }
}

TEST_CASE("kd_loss is overflow-safe and checks shapes") {
  const std::vector<double> big{1000.0, -1000.0, 999.0};
  CHECK(std::isfinite(kd_loss(big, big, 1, 3).loss));
  const std::vector<double> two{0.0, 1.0};
  CHECK_THROWS(kd_loss(big, two, 1, 3));
}

TEST_CASE("expand_classifier") {
  ClassifierHead old = ClassifierHead::random(3, 2, 5);
  Tensor f(2, 2, 1, 1);
  f.data = {1.0f, 0.0f, 0.0f, 1.0f};
  const std::vector<int> labels{1, 1};
  const auto h = expand_classifier(old, f, labels, 1);
  CHECK(h.classes == 4);
  CHECK(std::equal(old.weights.begin(), old.weights.end(), h.weights.begin()));
  CHECK(h.weights[6] == doctest::Approx(0.70710678));
  CHECK(h.weights[7] == doctest::Approx(0.70710678));

  Tensor same(3, 2, 1, 1);
  same.data = {3, 4, 3, 4, 0.5f, -1};
  const std::vector<int> l2{1, 1, 2};
  const auto h2 = expand_classifier(old, same, l2, 2);
  CHECK(h2.classes == 5);
  CHECK(h2.weights[6] == doctest::Approx(0.6));
  CHECK(h2.weights[7] == doctest::Approx(0.8));

  const std::vector<int> missing{1, 1, 1};
  CHECK_THROWS(expand_classifier(old, same, missing, 2));
}

TEST_CASE("select_exemplars") {
  DatasetSpec ds;
  ds.name = "d";
  for (int id = 1; id <= 1000; ++id)
    for (int i = 0; i < 3; ++i) ds.train.push_back({"", id + 5000, id, "d:c1", Image(2, 2)});
  const auto sel = select_exemplars(ds, 250, 2, 7, 1, 0);
  CHECK(sel.size() == 500u);
  std::map<int, int> per_id;
  for (const auto& e : sel) ++per_id[e.label];
  CHECK(per_id.size() == 250u);
  for (const auto& [id, n] : per_id) CHECK(n == 2);
  const auto again = select_exemplars(ds, 250, 2, 7, 1, 0);
  for (std::size_t i = 0; i < sel.size(); ++i) CHECK(sel[i].label == again[i].label);

  DatasetSpec small;
  for (int id = 1; id <= 100; ++id) small.train.push_back({"", id, id, "s:c1", Image(2, 2)});
  const auto clamp = select_exemplars(small, 250, 2, 1, 2, 40);
  CHECK(clamp.size() == 100u);  // one image per identity available
  std::set<int> ids;
  for (const auto& e : clamp) {
    ids.insert(e.identity);
    CHECK(e.label > 40);
    CHECK(e.domain_ordinal == 2);
  }
  CHECK(ids.size() == 100u);
}

TEST_CASE("exemplar buffer persistence and accounting") {
  ExemplarBuffer buf;
  buf.ids_per_step = 3;
  buf.images_per_id = 1;
  Image img(4, 2, 9);
  img.at(1, 1, 2) = 200;
  buf.entries.push_back({img, 11, 1, 1, "a:c1"});
  buf.entries.push_back({img, 12, 2, 1, "a:c2"});
  buf.entries.push_back({img, 30, 3, 2, "b:c1"});
  CHECK(buf.bytes() == 3 * 4 * 2 * 3);
  CHECK(buf.identity_count(1) == 2);
  const auto dir = std::filesystem::temp_directory_path() / "lreid_buffer_test";
  std::filesystem::remove_all(dir);
  buf.save(dir.string());
  const auto back = ExemplarBuffer::load(dir.string());
  CHECK(back.ids_per_step == 3);
  REQUIRE(back.size() == 3u);
  CHECK(back.entries[2].image == img);
  CHECK(back.entries[2].label == 3);
  CHECK(back.entries[1].camera == "a:c2");
  std::filesystem::remove_all(dir);
}

namespace {

TrainConfig tiny_config() {
  TrainConfig c;
  c.batch_size = 8;
  c.epochs = 2;
  c.warmup_epochs = 1;
  c.first_decay_epoch = 1;
  c.later_decay_epoch = 1;
  c.input_height = 32;
  c.input_width = 16;
  c.augment.pad = 2;
  c.seed = 3;
  return c;
}

}  // namespace

TEST_CASE("KD steps: buffer growth, head growth, degenerate weights") {
  SynthConfig sc;
  sc.domains = 3;
  sc.ids_per_domain = 12;
  sc.images_per_id = 4;
  const auto ds = synth_generate(sc);
  const auto cfg = tiny_config();

  KdModel model{Network(build_graph("tiny"), 1), {}};
  ExemplarBuffer buf;
  buf.ids_per_step = 4;
  KdConfig kd;
  std::size_t expected = 0;
  int classes = 0;
  for (int t = 0; t < 3; ++t) {
    const auto r = train_domain_kd(model, ds[t], buf, cfg, kd, t + 1);
    expected += std::min(4, ds[t].train_id_count()) * 2;
    classes += ds[t].train_id_count();
    CHECK(buf.size() == expected);
    CHECK(model.head.classes == classes);
    CHECK(r.history.size() == 2u);
    CHECK_FALSE(model.network.conv_frozen());
  }

  // t=1 with an empty buffer: KD and fine-tune coincide.
  KdModel a{Network(build_graph("tiny"), 1), {}};
  KdModel b = a;
  ExemplarBuffer ba, bb;
  KdConfig ft;
  ft.lambda_kd = 0.0;
  ft.replay = false;
  const auto ra = train_domain_kd(a, ds[0], ba, cfg, KdConfig{}, 1);
  const auto rb = train_domain_kd(b, ds[0], bb, cfg, ft, 1);
  for (std::size_t e = 0; e < ra.history.size(); ++e) CHECK(ra.history[e].loss == rb.history[e].loss);
  CHECK(a.network.export_weights() == b.network.export_weights());

  // lambda 0 with replay equals a replay-only run on the second step.
  KdConfig zero;
  zero.lambda_kd = 0.0;
  KdModel c = a, d = a;
  ExemplarBuffer bc = ba, bd = ba;
  KdConfig replay_only = zero;
  replay_only.head_mode = KdHeadMode::old_classes;
  const auto rc = train_domain_kd(c, ds[1], bc, cfg, zero, 2);
  const auto rd = train_domain_kd(d, ds[1], bd, cfg, replay_only, 2);
  for (std::size_t e = 0; e < rc.history.size(); ++e) CHECK(rc.history[e].loss == rd.history[e].loss);
  CHECK(c.head.weights == d.head.weights);

  // The teacher pulls the KD objective above the plain id loss on step 2.
  KdModel e = a;
  ExemplarBuffer be = ba;
  KdConfig old_cls;
  old_cls.head_mode = KdHeadMode::old_classes;
  const auto re = train_domain_kd(e, ds[1], be, cfg, old_cls, 2);
  CHECK(re.history.front().loss > rc.history.front().loss);
}
