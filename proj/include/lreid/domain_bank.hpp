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
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "lreid/backbone.hpp"
#include "lreid/bn_domain.hpp"
#include "lreid/container.hpp"
#include "lreid/sa_adapter.hpp"

namespace lreid {

/// Per-domain tunable state BN^(t) and SA^(t), captured after training step t.
struct DomainSnapshot {
  std::string domain_id;
  int ordinal = 0;  // 1-based training step
  std::string arch_id;
  std::vector<int> bn_layers;  // graph indices, graph order, neck last
  std::vector<BnLayerState> bn_states;
  std::vector<int> sa_layers;
  std::vector<SaKernel> sa_kernels;
  std::set<std::string> camera_ids;

  std::int64_t bn_value_count() const;  // 4 vectors per layer
  std::int64_t sa_value_count() const;
  bool operator==(const DomainSnapshot&) const = default;
};

/// Deep-copies the live BN and SA state of the network.
DomainSnapshot snapshot_capture(const Network& network, const std::string& domain_id, int ordinal,
                                std::set<std::string> camera_ids = {});

std::vector<std::uint8_t> serialize(const DomainSnapshot& snapshot);
/// Throws FormatError on a damaged stream.
DomainSnapshot deserialize(const std::vector<std::uint8_t>& bytes);

/// Ordered per-domain snapshots with a camera -> domain registry.
class Bank {
 public:
  explicit Bank(std::string arch_id = {}) : arch_id_(std::move(arch_id)) {}

  const std::string& arch_id() const { return arch_id_; }
  bool empty() const { return snapshots_.empty(); }
  std::size_t size() const { return snapshots_.size(); }
  const std::vector<DomainSnapshot>& snapshots() const { return snapshots_; }
  const DomainSnapshot& latest() const;

  /// Throws on a duplicate domain id, arch mismatch or camera collision.
  void add(DomainSnapshot snapshot);

  const DomainSnapshot* find_domain(const std::string& domain_id) const;
  const DomainSnapshot* find_ordinal(int ordinal) const;
  std::optional<std::string> domain_of_camera(const std::string& camera_id) const;

  /// Writes one .dasa file per snapshot plus bank.json under dir.
  void save(const std::string& dir) const;
  static Bank load(const std::string& dir);

 private:
  std::string arch_id_;
  std::vector<DomainSnapshot> snapshots_;
  std::map<std::string, std::string> camera_to_domain_;
};

/// Seeds the live BN/SA state from the latest snapshot. An empty bank leaves
/// the pre-trained BN and resets SA kernels to identity.
void forward_transfer_init(const Bank& bank, Network& network);

/// Resolution for a query: an explicit domain wins, then the camera registry,
/// then the latest snapshot (unseen-domain fallback).
struct SnapshotQuery {
  std::optional<std::string> camera_id;
  std::optional<int> domain_ordinal;
  std::optional<std::string> domain_id;
};
const DomainSnapshot& select_snapshot(const Bank& bank, const SnapshotQuery& query);

// ---------------------------------------------------------------------------
// Storage accounting

inline constexpr double kBytesPerMiB = 1048576.0;
inline constexpr std::int64_t kBytesPerValue = 4;

struct ExemplarPolicy {
  int steps = 4;
  int ids_per_step = 250;
  int images_per_id = 2;
  int height = 256;
  int width = 128;

  std::int64_t bytes() const;
};

struct StorageLine {
  std::string component;
  std::string convention;
  std::int64_t values = 0;  // 0 for raw-pixel lines
  std::int64_t bytes = 0;
  double mib() const { return static_cast<double>(bytes) / kBytesPerMiB; }
};

struct StorageReport {
  std::string arch_id;
  int domains = 0;
  std::vector<StorageLine> lines;

  const StorageLine& line(const std::string& component) const;
  /// Per-domain DASA cost under the affine-only BN convention.
  std::int64_t per_domain_affine_bytes() const;
  /// Per-domain DASA cost as actually serialized (all four BN vectors + neck + SA).
  std::int64_t per_domain_snapshot_bytes() const;
};

/// Pure parameter enumeration of a graph with SA inserted.
StorageReport storage_report(const BackboneGraph& graph, int domains, std::int64_t classifier_classes,
                             const ExemplarPolicy& exemplars);

std::string format_storage_table(const StorageReport& report);

}  // namespace lreid
