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

#include <filesystem>
#include <random>

#include "doctest.h"
#include "lreid/domain_bank.hpp"

using namespace lreid;

namespace {

Network tiny_with_sa(std::uint64_t seed) {
  Network n(build_graph("tiny"), seed);
  n.insert_sa(SaPlacement::all(), 5);
  return n;
}

void perturb(Network& n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> d(0.0f, 0.3f);
  for (int i : n.graph().bn_layers()) {
    auto& s = n.bn(i);
    for (auto* v : {&s.running_mean, &s.gamma, &s.beta}) {
      for (auto& x : *v) x += d(rng);
    }
    for (auto& x : s.running_var) x = 0.5f + std::abs(d(rng));
  }
  for (int i : n.graph().sa_placement)
    for (auto& x : n.sa(i).weights) x += d(rng);
}

Tensor images(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> d;
  Tensor t(4, 3, 32, 16);
  for (auto& v : t.data) v = d(rng);
  return t;
}

}  // namespace

TEST_CASE("snapshot layout for tiny and resnet50") {
  const auto tiny = snapshot_capture(tiny_with_sa(1), "a", 1, {"a:c1"});
  CHECK(tiny.bn_states.size() == 4u);
  CHECK(tiny.sa_kernels.size() == 3u);
  CHECK(tiny.bn_value_count() == 4 * (8 + 16 + 32 + 32));
  CHECK(tiny.sa_value_count() == 1400);
  CHECK((tiny.bn_value_count() + tiny.sa_value_count()) * 4 == 7008);

  Network big(build_graph("resnet50"), 0);
  big.insert_sa(SaPlacement::all(), 5);
  const auto snap = snapshot_capture(big, "m", 1);
  CHECK(snap.bn_states.size() == 54u);
  CHECK(snap.sa_kernels.size() == 53u);
  CHECK(snap.sa_value_count() == 664000);
}

TEST_CASE("capture is a deep copy") {
  Network net = tiny_with_sa(2);
  const auto snap = snapshot_capture(net, "a", 1);
  const auto copy = snap;
  for (int step = 0; step < 5; ++step) {
    perturb(net, 100 + step);
    net.forward(images(step), Mode::train);
  }
  CHECK(snap == copy);
  CHECK_FALSE(snapshot_capture(net, "a", 1) == snap);
}

TEST_CASE("serialize round trip and corruption") {
  Network net = tiny_with_sa(3);
  perturb(net, 7);
  const auto snap = snapshot_capture(net, "synthA", 2, {"synthA:c1", "synthA:c2"});
  const auto bytes = serialize(snap);
  CHECK(deserialize(bytes) == snap);
  for (std::size_t i = 0; i < bytes.size(); i += 7) {
    auto bad = bytes;
    bad[i] ^= 0x10;
    CHECK_THROWS_AS(deserialize(bad), FormatError);
  }
}

TEST_CASE("apply restores the captured state bitwise") {
  Network net = tiny_with_sa(4);
  perturb(net, 1);
  const auto snap = snapshot_capture(net, "a", 1);
  const Tensor x = images(9);
  const Tensor before = net.forward_eval(x);
  perturb(net, 2);
  CHECK_FALSE(net.forward_eval(x).data == before.data);
  net.apply(snap);
  CHECK(net.forward_eval(x).data == before.data);
  CHECK(snapshot_capture(net, "a", 1) == snap);

  Network other(build_graph("tiny"), 4);  // no SA: inventory differs
  CHECK_THROWS(other.apply(snap));
}

TEST_CASE("bank registry and selection") {
  Bank bank("tiny");
  CHECK_THROWS(select_snapshot(bank, {}));
  Network net = tiny_with_sa(5);
  bank.add(snapshot_capture(net, "d1", 1, {"d1:c1", "d1:c2"}));
  perturb(net, 3);
  bank.add(snapshot_capture(net, "d2", 2, {"d2:c3"}));

  CHECK(select_snapshot(bank, {.camera_id = "d2:c3"}).ordinal == 2);
  CHECK(select_snapshot(bank, {.camera_id = "d1:c2"}).ordinal == 1);
  CHECK(select_snapshot(bank, {.camera_id = "c99"}).ordinal == 2);
  CHECK(select_snapshot(bank, {.camera_id = "d2:c3", .domain_ordinal = 1}).ordinal == 1);
  CHECK(select_snapshot(bank, {.camera_id = "d2:c3", .domain_id = "d1"}).ordinal == 1);
  CHECK_THROWS(select_snapshot(bank, {.domain_ordinal = 7}));
  CHECK(bank.domain_of_camera("d1:c1") == "d1");

  CHECK_THROWS(bank.add(snapshot_capture(net, "d1", 3)));                // duplicate domain
  CHECK_THROWS(bank.add(snapshot_capture(net, "d3", 3, {"d1:c1"})));     // camera collision
  Network big(build_graph("resnet50"), 0);
  CHECK_THROWS(bank.add(snapshot_capture(big, "d4", 3)));                // arch mismatch
}

TEST_CASE("forward transfer") {
  Network net = tiny_with_sa(6);
  const auto pretrained_bn = snapshot_capture(net, "p", 1).bn_states;
  perturb(net, 4);
  Bank bank("tiny");
  forward_transfer_init(bank, net);
  const auto base = snapshot_capture(net, "p", 1);
  for (int i : net.graph().sa_placement) CHECK(net.sa(i) == sa_init_identity(net.sa(i).channels, 5));
  CHECK_FALSE(base.bn_states == pretrained_bn);  // empty bank keeps the live BN

  perturb(net, 5);
  bank.add(snapshot_capture(net, "d1", 1));
  perturb(net, 6);
  forward_transfer_init(bank, net);
  const auto again = snapshot_capture(net, "d1", 1);
  CHECK(again == bank.latest());
}

TEST_CASE("bank save/load") {
  const auto dir = std::filesystem::temp_directory_path() / "lreid_bank_test";
  std::filesystem::remove_all(dir);
  Bank bank("tiny");
  Network net = tiny_with_sa(8);
  bank.add(snapshot_capture(net, "d1", 1, {"d1:c1"}));
  perturb(net, 9);
  bank.add(snapshot_capture(net, "d2", 2, {"d2:c1"}));
  bank.save(dir.string());
  const Bank loaded = Bank::load(dir.string());
  REQUIRE(loaded.size() == 2u);
  CHECK(loaded.snapshots() == bank.snapshots());
  CHECK(loaded.domain_of_camera("d2:c1") == "d2");
  std::filesystem::remove_all(dir);
  CHECK_THROWS(Bank::load(dir.string()));
}

TEST_CASE("storage arithmetic") {
  ExemplarPolicy policy;
  CHECK(policy.bytes() == 196608000);
  auto g = insert_sa(build_graph("resnet50"), SaPlacement::all(), 5);
  const auto r = storage_report(g, 4, 8026, policy);
  CHECK(r.line("Exemplars").mib() == 187.5);
  CHECK(r.line("SA^(t)").values == 664000);
  CHECK(r.line("SA^(t)").mib() == doctest::Approx(2.533).epsilon(1e-3));
  CHECK(r.line("Backbone").values == 23508032);
  CHECK(r.line("Classifier").bytes == 8026LL * 2048 * 4);
  CHECK(r.line("BN^(t)/affine").values == 53120);
  CHECK(r.line("BN^(t)/full").values == 106240);
  CHECK(r.line("neck-BN^(t)").values == 4 * 2048);
  CHECK(r.per_domain_affine_bytes() == (53120 + 664000) * 4);
  CHECK(r.per_domain_snapshot_bytes() == (106240 + 8192 + 664000) * 4);
  CHECK(r.line("DASA cumulative").bytes == 4 * r.per_domain_snapshot_bytes());
  const auto table = format_storage_table(r);
  CHECK(table.find("187.500") != std::string::npos);
  CHECK(table.find("2.533") != std::string::npos);

  auto t = insert_sa(build_graph("tiny"), SaPlacement::all(), 5);
  CHECK(storage_report(t, 3, 10, policy).per_domain_snapshot_bytes() == 7008);
}
