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

// Acceptance suite: one [PASS]/[FAIL] line per criterion; exit code 0 only if all pass.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>

#include "lreid/sequence.hpp"
#include "oracles.hpp"

using namespace lreid;

namespace {

// Collects failed checks for one criterion.
struct Check {
  std::vector<std::string> failures;
  void expect(bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  }
};

std::string fmt(double v, int prec = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  return buf;
}

std::string sci(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

bool near_rel(double got, double want, double rel) { return std::abs(got - want) <= rel * std::abs(want); }

// ---- criterion 1: storage arithmetic -------------------------------------------------

void storage(Check& c, std::string& detail) {
  const BackboneGraph g = insert_sa(build_graph("resnet50"), SaPlacement::all(), 5);
  const StorageReport r = storage_report(g, 4, 8026, ExemplarPolicy{});
  const double ex = r.line("Exemplars").mib();
  const double sa = r.line("SA^(t)").mib();
  const double bb = r.line("Backbone").mib();
  const double cl = r.line("Classifier").mib();
  const double bn = r.line("BN^(t)/affine").mib();
  c.expect(ex == 187.5, "exemplars " + fmt(ex) + " MiB != 187.5");
  c.expect(near_rel(sa, 2.533, 1e-3), "SA " + fmt(sa) + " MiB not within 0.1% of 2.533");
  c.expect(near_rel(bb, 89.684, 5e-3), "backbone " + fmt(bb) + " MiB not within 0.5% of 89.684");
  c.expect(near_rel(cl, 62.703, 1e-3), "classifier " + fmt(cl) + " MiB not within 0.1% of 62.703");
  c.expect(near_rel(bn, 0.210, 5e-2), "BN affine " + fmt(bn) + " MiB not within 5% of 0.210");
  detail = "exemplars " + fmt(ex, 3) + ", SA " + fmt(sa, 3) + ", backbone " + fmt(bb, 3) + ", classifier " +
           fmt(cl, 3) + ", BN affine " + fmt(bn, 3) + " MiB";
}

// ---- criteria 2-4: desk-scale sequences ----------------------------------------------

// Three training domains plus a fourth one used only to pre-train the backbone.
struct DeskSetup {
  std::vector<DatasetSpec> domains;
  NamedArrays pretrained;
  TrainConfig train;
};

DeskSetup desk_setup(std::uint64_t seed) {
  SynthConfig sc;
  sc.domains = 4;
  sc.ids_per_domain = 100;
  sc.images_per_id = 8;
  sc.seed = 1000 + seed;
  auto all = synth_generate(sc);

  TrainConfig t;
  t.batch_size = 16;
  t.instances_per_id = 2;
  t.epochs = 40;
  t.base_lr = 3.5e-3;
  t.warmup_start_lr = 3.5e-4;
  t.warmup_epochs = 6;
  t.first_decay_epoch = 30;
  t.later_decay_epoch = 30;
  t.input_height = 32;
  t.input_width = 16;
  t.augment.pad = 2;
  t.seed = seed;

  DeskSetup s;
  s.pretrained = pretrain_backbone("tiny", all[3], t, seed);
  all.pop_back();
  s.domains = std::move(all);
  s.train = t;
  return s;
}

SequenceState run(const DeskSetup& s, Method method, int kernel_size, const std::string& placement,
                  const StepCallback& on_step = {}) {
  SequenceOptions o;
  o.method = method;
  o.train = s.train;
  o.pretrained = &s.pretrained;
  o.kernel_size = kernel_size;
  o.sa_placement = placement;
  o.exemplar_ids = 5;
  o.init_seed = s.train.seed;
  return run_sequence(s.domains, o, on_step);
}

double r1(const StepRecord& step, int domain) { return step.seen[domain].result.rank1(); }

void zero_forgetting(Check& c, std::string& detail, const DeskSetup& s,
                     std::optional<SequenceState>& dasa_out) {
  // Record domain 1 as evaluated right after step 1, then re-check after steps 2 and 3
  // through the saved snapshot 1.
  RetrievalResult after1;
  const auto st = run(s, Method::dasa, 5, "all", [&](const SequenceState&, const StepRecord& rec) {
    if (rec.step == 1) after1 = rec.seen[0].result;
  });
  const RetrievalResult& final1 = st.steps.back().seen[0].result;
  c.expect(st.steps.back().seen[0].snapshots_used == std::vector<int>{1}, "domain 1 not served by snapshot 1");
  c.expect(after1.mAP == final1.mAP, "domain-1 mAP changed: " + fmt(after1.mAP, 12) + " vs " + fmt(final1.mAP, 12));
  c.expect(after1.cmc == final1.cmc, "domain-1 CMC changed");
  // Independent re-evaluation with snapshot 1 applied by hand.
  Network net = st.network;
  net.apply(*st.bank.find_ordinal(1));
  const auto direct = evaluate_domain(net, nullptr, s.domains[0]);
  c.expect(direct.result.mAP == after1.mAP && direct.result.rank1() == after1.rank1(),
           "snapshot 1 applied by hand disagrees with the step-1 evaluation");
  detail = "domain-1 mAP " + fmt(100 * after1.mAP, 4) + " / R-1 " + fmt(100 * after1.rank1(), 2) +
           " after step 1 and after step 3";
  dasa_out = st;
}

void ordering(Check& c, std::string& detail, const DeskSetup& s, const SequenceState& dasa) {
  const auto kd = run(s, Method::kd, 5, "all");
  const auto ft = run(s, Method::finetune, 5, "all");
  const double a_dasa = dasa.steps.back().average.rank1;
  const double a_kd = kd.steps.back().average.rank1;
  const double a_ft = ft.steps.back().average.rank1;
  c.expect(a_dasa > a_kd, "DASA s-R1 " + fmt(100 * a_dasa, 2) + " <= KD " + fmt(100 * a_kd, 2));
  c.expect(a_kd > a_ft, "KD s-R1 " + fmt(100 * a_kd, 2) + " <= fine-tune " + fmt(100 * a_ft, 2));
  const double ft_drop = r1(ft.steps.front(), 0) - r1(ft.steps.back(), 0);
  const double dasa_drop = r1(dasa.steps.front(), 0) - r1(dasa.steps.back(), 0);
  // Rank-1 over 100 queries moves in steps of 0.01; compare in whole points.
  const double ft_points = std::round(100 * ft_drop * 1e6) / 1e6;
  c.expect(ft_points >= 10.0, "fine-tune domain-1 R-1 drop " + fmt(ft_points, 2) + " < 10 points");
  c.expect(dasa_drop == 0.0, "DASA domain-1 R-1 drop " + fmt(100 * dasa_drop, 4) + " != 0");
  detail = "final s-R1 DASA " + fmt(100 * a_dasa, 2) + " > KD " + fmt(100 * a_kd, 2) + " > FT " +
           fmt(100 * a_ft, 2) + "; domain-1 R-1 drop FT " + fmt(ft_points, 2) + ", DASA " +
           fmt(100 * dasa_drop, 2);
}

void kernel_ablation(Check& c, std::string& detail, const DeskSetup& seed0, const SequenceState& dasa0) {
  double sum_k5 = 0.0, sum_k1 = 0.0;
  std::string per_seed;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const DeskSetup s = seed == 0 ? DeskSetup{} : desk_setup(seed);
    const DeskSetup& use = seed == 0 ? seed0 : s;
    const double k5 = seed == 0 ? dasa0.steps.back().average.mAP : run(use, Method::dasa, 5, "all").steps.back().average.mAP;
    const double k1 = run(use, Method::dasa, 1, "all").steps.back().average.mAP;
    const double bn = run(use, Method::dasa, 5, "none").steps.back().average.mAP;
    sum_k5 += k5;
    sum_k1 += k1;
    c.expect(100 * (k1 - bn) <= 0.5, "seed " + std::to_string(seed) + ": k=1 beats BN-only by " +
                                         fmt(100 * (k1 - bn), 2) + " points");
    per_seed += " seed" + std::to_string(seed) + " k5/k1/bn " + fmt(100 * k5, 2) + "/" + fmt(100 * k1, 2) + "/" +
                fmt(100 * bn, 2);
  }
  c.expect(sum_k5 > sum_k1, "mean s-mAP k=5 " + fmt(100 * sum_k5 / 3, 2) + " <= k=1 " + fmt(100 * sum_k1 / 3, 2));
  detail = "mean s-mAP k5 " + fmt(100 * sum_k5 / 3, 2) + " > k1 " + fmt(100 * sum_k1 / 3, 2) + ";" + per_seed;
}

// ---- criterion 5: identity-initialised SA --------------------------------------------

void identity_equivalence(Check& c, std::string& detail) {
  double worst = 0.0;
  for (const char* arch : {"tiny", "resnet50"}) {
    Network plain(build_graph(arch), 11);
    // Non-trivial "pre-trained" BN statistics and affines.
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<float> u(0.5f, 1.5f), sh(-0.3f, 0.3f);
    for (int i : plain.graph().bn_layers()) {
      auto& bn = plain.bn(i);
      for (auto& v : bn.running_mean) v = sh(rng);
      for (auto& v : bn.running_var) v = u(rng);
      for (auto& v : bn.gamma) v = u(rng);
      for (auto& v : bn.beta) v = sh(rng);
    }
    Network with_sa = plain;
    with_sa.insert_sa(SaPlacement::all(), 5);
    const int count = 100, batch = 10;
    std::normal_distribution<float> d;
    for (int start = 0; start < count; start += batch) {
      Tensor x(batch, 3, 32, 16);
      for (auto& v : x.data) v = d(rng);
      const Tensor a = plain.forward_eval(x);
      const Tensor b = with_sa.forward_eval(x);
      for (std::size_t i = 0; i < a.data.size(); ++i)
        worst = std::max(worst, static_cast<double>(std::abs(a.data[i] - b.data[i])));
    }
  }
  c.expect(worst < 1e-6, "max |delta| " + sci(worst));
  detail = "max |delta| " + sci(worst) + " over 100 inputs (tiny, resnet50)";
}

// ---- criterion 6: retrieval metrics ---------------------------------------------------

void metric_oracles(Check& c, std::string& detail) {
  std::mt19937_64 rng(2026);
  int instances = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    std::uniform_int_distribution<int> nq(1, 8), ng(1, 15), nid(1, 5), ncam(1, 3), coarse(-2, 2);
    const int q = nq(rng), g = ng(rng), dim = 4;
    LabeledFeatures Q, G;
    Q.dim = G.dim = dim;
    std::vector<int> qcam, gcam;
    for (int i = 0; i < q; ++i) {
      for (int k = 0; k < dim; ++k) Q.features.push_back(coarse(rng) + 0.25f);
      Q.identities.push_back(nid(rng));
      qcam.push_back(ncam(rng));
      Q.cameras.push_back("c" + std::to_string(qcam.back()));
    }
    for (int j = 0; j < g; ++j) {
      for (int k = 0; k < dim; ++k) G.features.push_back(coarse(rng) + 0.25f);
      G.identities.push_back(nid(rng));
      gcam.push_back(ncam(rng));
      G.cameras.push_back("c" + std::to_string(gcam.back()));
    }
    const Metric m = trial % 2 ? Metric::euclidean : Metric::cosine;
    const auto got = evaluate_retrieval(Q, G, m, 10);
    const auto dist = pairwise_distance(Q.features, q, G.features, g, dim, m);
    const auto ref = oracle::retrieval(dist, q, g, Q.identities, qcam, G.identities, gcam, 10);
    c.expect(got.valid_queries == ref.valid, "valid query count differs in trial " + std::to_string(trial));
    worst = std::max(worst, std::abs(got.mAP - ref.mAP));
    for (int k = 0; k < 10; ++k) worst = std::max(worst, std::abs(got.cmc[k] - ref.cmc[k]));
    ++instances;
  }
  c.expect(worst <= 1e-9, "max deviation " + sci(worst));
  const auto ap = average_precision({true, false, true});
  c.expect(ap && std::abs(*ap - 0.8333) < 1e-4, "AP worked example");
  c.expect(ap && std::abs(*ap - *oracle::ap({1, 0, 1})) < 1e-12, "AP worked example vs oracle");
  detail = std::to_string(instances) + " instances, max deviation " + sci(worst) + ", AP example " +
           fmt(ap.value_or(-1), 4);
}

// ---- criterion 7: distillation loss ---------------------------------------------------

void kd_checks(Check& c, std::string& detail) {
  std::mt19937_64 rng(77);
  std::normal_distribution<double> d(0.0, 2.5);
  double worst_entropy = 0.0, worst_grad = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const int b = 1 + trial % 4, n = 2 + trial % 9;
    std::vector<double> t(b * n), s(b * n);
    for (auto& v : t) v = d(rng);
    for (auto& v : s) v = d(rng);
    double ent = 0.0;
    for (int i = 0; i < b; ++i) ent += oracle::entropy(oracle::softmax({t.begin() + i * n, t.begin() + (i + 1) * n}));
    worst_entropy = std::max(worst_entropy, std::abs(kd_loss(t, t, b, n).loss - ent / b));
    const auto r = kd_loss(t, s, b, n);
    const auto num = oracle::numeric_grad([&](const std::vector<double>& v) { return kd_loss(t, v, b, n).loss; }, s, 1e-5);
    worst_grad = std::max(worst_grad, oracle::rel_error(r.dstudent, num));
  }
  const double hand = kd_loss(std::vector<double>{0.0, 0.0}, std::vector<double>{std::log(3.0), 0.0}, 1, 2).loss;
  c.expect(worst_entropy < 1e-6, "kd_loss(p,p) vs entropy " + sci(worst_entropy));
  c.expect(worst_grad < 1e-4, "gradient rel. error " + sci(worst_grad));
  c.expect(std::abs(hand - 0.8370) < 1e-4, "hand example " + fmt(hand, 6));
  detail = "entropy dev " + sci(worst_entropy) + ", grad rel err " + sci(worst_grad) +
           ", hand " + fmt(hand, 4);
}

// ---- criterion 8: batch normalization --------------------------------------------------

void bn_checks(Check& c, std::string& detail) {
  std::mt19937_64 rng(88);
  double worst_mean = 0.0, worst_var = 0.0;
  for (int trial = 0; trial < 30; ++trial) {
    std::uniform_real_distribution<float> scale(0.1f, 20.0f), shift(-50.0f, 50.0f);
    std::normal_distribution<float> nd;
    const int ch = 4;
    BnLayerState s = BnLayerState::neutral(ch);
    Tensor x(6, ch, 3, 5);
    for (int k = 0; k < ch; ++k) {
      const float a = scale(rng), m = shift(rng);
      for (int b = 0; b < 6; ++b)
        for (float& v : x.channel(b, k)) v = m + a * nd(rng);
    }
    BnTrainCache cache;
    bn_forward_train(s, x, &cache);
    for (int k = 0; k < ch; ++k) {
      double mean = 0.0, sq = 0.0;
      int n = 0;
      for (int b = 0; b < 6; ++b)
        for (float v : cache.normalized.channel(b, k)) {
          mean += v;
          sq += static_cast<double>(v) * v;
          ++n;
        }
      mean /= n;
      worst_mean = std::max(worst_mean, std::abs(mean));
      worst_var = std::max(worst_var, std::abs(sq / n - mean * mean - 1.0));
    }
  }
  c.expect(worst_mean < 1e-5, "normalized mean " + sci(worst_mean));
  c.expect(worst_var < 1e-3, "normalized variance deviation " + sci(worst_var));

  // Running update: constant batch of 10 from neutral stats -> mean 1.0, var 0.9.
  BnLayerState r = BnLayerState::neutral(1);
  bn_forward_train(r, Tensor(2, 1, 1, 1, 10.0f));
  c.expect(std::abs(r.running_mean[0] - 1.0f) < 1e-6 && std::abs(r.running_var[0] - 0.9f) < 1e-6,
           "running update example");
  // Train-mode hand example {1,3}, gamma 2, beta 1 -> {-1, 3}.
  BnLayerState h = BnLayerState::neutral(1);
  h.gamma = {2.0f};
  h.beta = {1.0f};
  Tensor x2(2, 1, 1, 1);
  x2.data = {1.0f, 3.0f};
  const Tensor y2 = bn_forward_train(h, x2);
  c.expect(std::abs(y2.data[0] + 1.0f) < 1e-4 && std::abs(y2.data[1] - 3.0f) < 1e-4, "train hand example");
  // Eval-mode hand example mu 2, var 4, gamma 3, beta -1, eps 0, x 4 -> 2.
  BnLayerState e = BnLayerState::neutral(1);
  e.running_mean = {2.0f};
  e.running_var = {4.0f};
  e.gamma = {3.0f};
  e.beta = {-1.0f};
  e.eps = 0.0f;
  c.expect(std::abs(bn_forward_eval(e, Tensor(1, 1, 1, 1, 4.0f)).data[0] - 2.0f) < 1e-6, "eval hand example");

  // Affine recovery: gamma = sqrt(var + eps), beta = mean reproduces the input.
  std::normal_distribution<float> d(4.0f, 2.0f);
  Tensor x3(3, 2, 4, 4);
  for (auto& v : x3.data) v = d(rng);
  BnLayerState a = BnLayerState::neutral(2);
  for (int k = 0; k < 2; ++k) {
    double m = 0.0, sq = 0.0;
    int n = 0;
    for (int b = 0; b < 3; ++b)
      for (float v : x3.channel(b, k)) m += v, ++n;
    m /= n;
    for (int b = 0; b < 3; ++b)
      for (float v : x3.channel(b, k)) sq += (v - m) * (v - m);
    a.gamma[k] = static_cast<float>(std::sqrt(sq / n + a.eps));
    a.beta[k] = static_cast<float>(m);
  }
  const Tensor y3 = bn_forward_train(a, x3);
  double worst_rec = 0.0;
  for (std::size_t i = 0; i < x3.data.size(); ++i)
    worst_rec = std::max(worst_rec, static_cast<double>(std::abs(y3.data[i] - x3.data[i])));
  c.expect(worst_rec < 1e-4, "affine recovery deviation " + sci(worst_rec));
  detail = "max |mean| " + sci(worst_mean) + ", max |var-1| " + sci(worst_var) +
           ", affine recovery " + sci(worst_rec);
}

// ---- criterion 9: schedule and sampler ------------------------------------------------

void schedule_sampler(Check& c, std::string& detail) {
  const TrainConfig t;
  c.expect(lr_at_epoch(0, t, true) == 3.5e-5, "lr(0)");
  c.expect(lr_at_epoch(10, t, true) == 3.5e-4, "lr(10)");
  for (int e = t.first_decay_epoch; e < t.epochs; ++e)
    c.expect(std::abs(lr_at_epoch(e, t, true) - 3.5e-5) < 1e-15, "lr(" + std::to_string(e) + ") after decay");
  // 751 identities with 2 to 12 images each.
  std::vector<int> labels;
  for (int id = 1; id <= 751; ++id)
    for (int i = 0; i < 2 + id % 11; ++i) labels.push_back(id);
  std::mt19937_64 rng(9);
  const auto epoch = pk_sample_epoch(labels, t.batch_size, t.instances_per_id, rng);
  int bad = 0;
  for (const auto& batch : epoch.batches) {
    std::map<int, int> per_id;
    for (int idx : batch) ++per_id[labels[idx]];
    bool ok = batch.size() == 128u && per_id.size() == 64u;
    for (const auto& [id, n] : per_id) ok = ok && n == 2;
    bad += !ok;
  }
  c.expect(!epoch.batches.empty(), "no batches");
  c.expect(bad == 0, std::to_string(bad) + " batches are not 64 x 2");
  detail = "lr 3.5e-5 / 3.5e-4 / 3.5e-5; " + std::to_string(epoch.batches.size()) + " batches of 64 ids x 2";
}

// ---- criterion 10: snapshot serialization ----------------------------------------------

DomainSnapshot random_snapshot(std::mt19937_64& rng, int index) {
  std::uniform_int_distribution<int> layers(1, 6), chans(1, 24), kpick(0, 2), cams(0, 4);
  std::normal_distribution<float> d;
  std::uniform_real_distribution<float> pos(0.01f, 3.0f);
  DomainSnapshot s;
  s.domain_id = "domain_" + std::to_string(index);
  s.ordinal = 1 + index % 7;
  s.arch_id = index % 2 ? "tiny" : "resnet50";
  const int nbn = layers(rng);
  for (int i = 0; i < nbn; ++i) {
    s.bn_layers.push_back(2 * i + 1);
    BnLayerState b = BnLayerState::neutral(chans(rng));
    for (auto& v : b.running_mean) v = d(rng);
    for (auto& v : b.running_var) v = pos(rng);
    for (auto& v : b.gamma) v = d(rng);
    for (auto& v : b.beta) v = d(rng);
    s.bn_states.push_back(std::move(b));
  }
  const int nsa = layers(rng) - 1;
  for (int i = 0; i < nsa; ++i) {
    s.sa_layers.push_back(2 * i);
    SaKernel k;
    k.channels = chans(rng);
    k.kernel_size = 1 + 2 * kpick(rng);
    k.weights.resize(static_cast<std::size_t>(k.channels) * k.taps());
    for (auto& v : k.weights) v = d(rng);
    s.sa_kernels.push_back(std::move(k));
  }
  const int ncam = cams(rng);
  for (int i = 0; i < ncam; ++i) s.camera_ids.insert(s.domain_id + ":c" + std::to_string(i + 1));
  return s;
}

void serialization(Check& c, std::string& detail) {
  std::mt19937_64 rng(1010);
  int round_trips = 0;
  long corruptions = 0, missed = 0;
  for (int i = 0; i < 100; ++i) {
    const DomainSnapshot s = random_snapshot(rng, i);
    const auto bytes = serialize(s);
    const DomainSnapshot back = deserialize(bytes);
    const bool same = back == s && serialize(back) == bytes;
    c.expect(same, "round trip " + std::to_string(i));
    round_trips += same;
    // Every byte, three different corruption masks.
    for (std::size_t pos = 0; pos < bytes.size(); ++pos) {
      for (std::uint8_t mask : {std::uint8_t{0x01}, std::uint8_t{0x80}, std::uint8_t{0xFF}}) {
        auto bad = bytes;
        bad[pos] ^= mask;
        ++corruptions;
        try {
          deserialize(bad);
          ++missed;
        } catch (const FormatError&) {
        }
      }
    }
  }
  c.expect(missed == 0, std::to_string(missed) + " corruptions went undetected");
  detail = std::to_string(round_trips) + "/100 bitwise round trips, " + std::to_string(corruptions - missed) + "/" +
           std::to_string(corruptions) + " single-byte corruptions detected";
}

struct Outcome {
  bool pass;
  std::string detail;
};

Outcome evaluate(const std::function<void(Check&, std::string&)>& body) {
  Check c;
  std::string detail;
  try {
    body(c, detail);
  } catch (const std::exception& e) {
    c.failures.push_back(std::string("exception: ") + e.what());
  }
  std::string msg = detail;
  for (const auto& f : c.failures) msg += (msg.empty() ? "" : "; ") + f;
  return {c.failures.empty(), msg};
}

}  // namespace

// Optional arguments select criteria by number; default runs all ten.
int main(int argc, char** argv) {
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  int failed = 0, ran = 0;
  auto timed = [&](int id, const std::function<void(Check&, std::string&)>& body) {
    if (!selected.empty() && !selected.count(id)) return;
    const auto t0 = std::chrono::steady_clock::now();
    const Outcome o = evaluate(body);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("[%s] criterion %d: %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", id, o.detail.c_str(), seconds);
    std::fflush(stdout);
    failed += !o.pass;
    ++ran;
  };

  timed(1, storage);

  // Criteria 2-4 share the seed-0 setup and its DASA sequence.
  std::optional<DeskSetup> desk;
  std::optional<SequenceState> dasa;
  auto ensure_dasa = [&] {
    if (!desk) desk = desk_setup(0);
    if (!dasa) {
      Check ignored;
      std::string unused;
      zero_forgetting(ignored, unused, *desk, dasa);
    }
  };
  timed(2, [&](Check& c, std::string& d) {
    desk = desk_setup(0);
    zero_forgetting(c, d, *desk, dasa);
  });
  timed(3, [&](Check& c, std::string& d) {
    ensure_dasa();
    ordering(c, d, *desk, *dasa);
  });
  timed(4, [&](Check& c, std::string& d) {
    ensure_dasa();
    kernel_ablation(c, d, *desk, *dasa);
  });

  timed(5, identity_equivalence);
  timed(6, metric_oracles);
  timed(7, kd_checks);
  timed(8, bn_checks);
  timed(9, schedule_sampler);
  timed(10, serialization);

  std::printf("%d/%d criteria passed\n", ran - failed, ran);
  return failed == 0 ? 0 : 1;
}
