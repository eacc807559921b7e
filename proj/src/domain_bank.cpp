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

#include "lreid/domain_bank.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace lreid {

namespace fs = std::filesystem;

std::int64_t DomainSnapshot::bn_value_count() const {
  std::int64_t n = 0;
  for (const auto& s : bn_states) n += 4 * static_cast<std::int64_t>(s.channels());
  return n;
}

std::int64_t DomainSnapshot::sa_value_count() const {
  std::int64_t n = 0;
  for (const auto& k : sa_kernels) n += static_cast<std::int64_t>(k.weights.size());
  return n;
}

DomainSnapshot snapshot_capture(const Network& network, const std::string& domain_id, int ordinal,
                                std::set<std::string> camera_ids) {
  const auto& g = network.graph();
  DomainSnapshot s;
  s.domain_id = domain_id;
  s.ordinal = ordinal;
  s.arch_id = g.arch_id;
  s.bn_layers = g.bn_layers();
  if (s.bn_layers.empty()) throw std::invalid_argument("graph has no BN state to capture");
  for (int idx : s.bn_layers) s.bn_states.push_back(network.bn(idx));
  for (int idx : g.sa_placement) {
    s.sa_layers.push_back(idx);
    s.sa_kernels.push_back(network.sa(idx));
  }
  s.camera_ids = std::move(camera_ids);
  return s;
}

namespace {

std::string join_cameras(const std::set<std::string>& cams) {
  std::string out;
  for (const auto& c : cams) {
    if (!out.empty()) out += '\n';
    out += c;
  }
  return out;
}

std::set<std::string> split_cameras(const std::string& s) {
  std::set<std::string> out;
  std::istringstream is(s);
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty()) out.insert(line);
  }
  return out;
}

std::string float_bits(float v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%a", static_cast<double>(v));
  return buf;
}

const NamedArray& need(const NamedArrays& a, const std::string& name) {
  const NamedArray* e = a.find(name);
  if (e == nullptr) throw FormatError("snapshot lacks entry '" + name + "'");
  return *e;
}

}  // namespace

std::vector<std::uint8_t> serialize(const DomainSnapshot& s) {
  NamedArrays a;
  a.arch_id = s.arch_id;
  a.meta["kind"] = "domain-snapshot";
  a.meta["domain_id"] = s.domain_id;
  a.meta["ordinal"] = std::to_string(s.ordinal);
  a.meta["cameras"] = join_cameras(s.camera_ids);
  std::string bn_list;
  std::string consts;
  for (std::size_t i = 0; i < s.bn_layers.size(); ++i) {
    const auto& st = s.bn_states[i];
    const std::string prefix = "layer" + std::to_string(s.bn_layers[i]) + ".";
    const std::vector<std::uint32_t> shape{static_cast<std::uint32_t>(st.channels())};
    a.entries.push_back({prefix + "running_mean", shape, st.running_mean});
    a.entries.push_back({prefix + "running_var", shape, st.running_var});
    a.entries.push_back({prefix + "gamma", shape, st.gamma});
    a.entries.push_back({prefix + "beta", shape, st.beta});
    bn_list += (i ? "," : "") + std::to_string(s.bn_layers[i]);
    consts += (i ? "," : "") + float_bits(st.eps) + ":" + float_bits(st.momentum);
  }
  std::string sa_list;
  for (std::size_t i = 0; i < s.sa_layers.size(); ++i) {
    const auto& k = s.sa_kernels[i];
    a.entries.push_back({"layer" + std::to_string(s.sa_layers[i]) + ".sa_weight",
                         {static_cast<std::uint32_t>(k.channels),
                          static_cast<std::uint32_t>(k.kernel_size),
                          static_cast<std::uint32_t>(k.kernel_size)},
                         k.weights});
    sa_list += (i ? "," : "") + std::to_string(s.sa_layers[i]);
  }
  a.meta["bn_layers"] = bn_list;
  a.meta["bn_consts"] = consts;
  a.meta["sa_layers"] = sa_list;
  return encode(a);
}

DomainSnapshot deserialize(const std::vector<std::uint8_t>& bytes) {
  const NamedArrays a = decode(bytes);
  auto meta = [&](const std::string& key) -> const std::string& {
    auto it = a.meta.find(key);
    if (it == a.meta.end()) throw FormatError("snapshot lacks metadata '" + key + "'");
    return it->second;
  };
  if (meta("kind") != "domain-snapshot") throw FormatError("container is not a domain snapshot");
  auto split_ints = [](const std::string& s) {
    std::vector<int> out;
    std::istringstream is(s);
    std::string item;
    while (std::getline(is, item, ',')) out.push_back(std::stoi(item));
    return out;
  };
  DomainSnapshot s;
  s.arch_id = a.arch_id;
  s.domain_id = meta("domain_id");
  s.ordinal = std::stoi(meta("ordinal"));
  s.camera_ids = split_cameras(meta("cameras"));
  s.bn_layers = split_ints(meta("bn_layers"));
  s.sa_layers = split_ints(meta("sa_layers"));
  std::vector<std::string> consts;
  {
    std::istringstream is(meta("bn_consts"));
    std::string item;
    while (std::getline(is, item, ',')) consts.push_back(item);
  }
  if (consts.size() != s.bn_layers.size()) throw FormatError("BN constant table length mismatch");
  for (std::size_t i = 0; i < s.bn_layers.size(); ++i) {
    const std::string prefix = "layer" + std::to_string(s.bn_layers[i]) + ".";
    BnLayerState st;
    st.running_mean = need(a, prefix + "running_mean").data;
    st.running_var = need(a, prefix + "running_var").data;
    st.gamma = need(a, prefix + "gamma").data;
    st.beta = need(a, prefix + "beta").data;
    const auto colon = consts[i].find(':');
    if (colon == std::string::npos) throw FormatError("malformed BN constants");
    st.eps = std::strtof(consts[i].substr(0, colon).c_str(), nullptr);
    st.momentum = std::strtof(consts[i].substr(colon + 1).c_str(), nullptr);
    s.bn_states.push_back(std::move(st));
  }
  for (int idx : s.sa_layers) {
    const auto& e = need(a, "layer" + std::to_string(idx) + ".sa_weight");
    if (e.shape.size() != 3 || e.shape[1] != e.shape[2]) {
      throw FormatError("SA entry for layer " + std::to_string(idx) + " is not M x k x k");
    }
    s.sa_kernels.push_back({static_cast<int>(e.shape[0]), static_cast<int>(e.shape[1]), e.data});
  }
  return s;
}

// ---------------------------------------------------------------------------
// Bank

const DomainSnapshot& Bank::latest() const {
  if (snapshots_.empty()) throw std::logic_error("bank is empty");
  return snapshots_.back();
}

void Bank::add(DomainSnapshot snapshot) {
  if (arch_id_.empty()) arch_id_ = snapshot.arch_id;
  require(snapshot.arch_id == arch_id_, "snapshot arch '" + snapshot.arch_id +
                                            "' does not match bank arch '" + arch_id_ + "'");
  require(find_domain(snapshot.domain_id) == nullptr,
          "domain '" + snapshot.domain_id + "' already in the bank");
  for (const auto& cam : snapshot.camera_ids) {
    auto it = camera_to_domain_.find(cam);
    require(it == camera_to_domain_.end(), "camera '" + cam + "' already registered to domain '" +
                                               (it == camera_to_domain_.end() ? "" : it->second) +
                                               "'");
  }
  for (const auto& cam : snapshot.camera_ids) camera_to_domain_[cam] = snapshot.domain_id;
  snapshots_.push_back(std::move(snapshot));
}

const DomainSnapshot* Bank::find_domain(const std::string& domain_id) const {
  for (const auto& s : snapshots_) {
    if (s.domain_id == domain_id) return &s;
  }
  return nullptr;
}

const DomainSnapshot* Bank::find_ordinal(int ordinal) const {
  for (const auto& s : snapshots_) {
    if (s.ordinal == ordinal) return &s;
  }
  return nullptr;
}

std::optional<std::string> Bank::domain_of_camera(const std::string& camera_id) const {
  auto it = camera_to_domain_.find(camera_id);
  if (it == camera_to_domain_.end()) return std::nullopt;
  return it->second;
}

void Bank::save(const std::string& dir) const {
  fs::create_directories(dir);
  nlohmann::json manifest;
  manifest["arch_id"] = arch_id_;
  manifest["snapshots"] = nlohmann::json::array();
  for (const auto& s : snapshots_) {
    const std::string file = "domain_" + std::to_string(s.ordinal) + ".dasa";
    write_file((fs::path(dir) / file).string(), serialize(s));
    manifest["snapshots"].push_back({{"ordinal", s.ordinal},
                                     {"domain_id", s.domain_id},
                                     {"cameras", s.camera_ids},
                                     {"path", file}});
  }
  std::ofstream f(fs::path(dir) / "bank.json");
  f << manifest.dump(2) << "\n";
  if (!f) throw std::runtime_error("failed writing bank manifest in '" + dir + "'");
}

Bank Bank::load(const std::string& dir) {
  std::ifstream f(fs::path(dir) / "bank.json");
  if (!f) throw std::runtime_error("no bank manifest at '" + dir + "/bank.json'");
  const auto manifest = nlohmann::json::parse(f);
  Bank bank(manifest.at("arch_id").get<std::string>());
  for (const auto& entry : manifest.at("snapshots")) {
    auto s = deserialize(read_file((fs::path(dir) / entry.at("path").get<std::string>()).string()));
    if (s.ordinal != entry.at("ordinal").get<int>() ||
        s.domain_id != entry.at("domain_id").get<std::string>()) {
      throw FormatError("bank manifest disagrees with snapshot '" +
                        entry.at("path").get<std::string>() + "'");
    }
    bank.add(std::move(s));
  }
  return bank;
}

void forward_transfer_init(const Bank& bank, Network& network) {
  if (bank.empty()) {
    const auto& g = network.graph();
    for (int idx : g.sa_placement) {
      network.sa(idx) = sa_init_identity(g.layers[idx].out_channels, g.sa_kernel_size);
    }
    return;
  }
  require(bank.arch_id() == network.graph().arch_id,
          "bank arch '" + bank.arch_id() + "' does not match network '" +
              network.graph().arch_id + "'");
  network.apply(bank.latest());
}

const DomainSnapshot& select_snapshot(const Bank& bank, const SnapshotQuery& query) {
  if (bank.empty()) throw std::logic_error("cannot select a snapshot from an empty bank");
  if (query.domain_ordinal) {
    const auto* s = bank.find_ordinal(*query.domain_ordinal);
    require(s != nullptr, "no snapshot for domain ordinal " + std::to_string(*query.domain_ordinal));
    return *s;
  }
  if (query.domain_id) {
    const auto* s = bank.find_domain(*query.domain_id);
    require(s != nullptr, "no snapshot for domain '" + *query.domain_id + "'");
    return *s;
  }
  if (query.camera_id) {
    if (auto d = bank.domain_of_camera(*query.camera_id)) return *bank.find_domain(*d);
  }
  return bank.latest();
}

// ---------------------------------------------------------------------------
// Storage accounting

std::int64_t ExemplarPolicy::bytes() const {
  return static_cast<std::int64_t>(steps) * ids_per_step * images_per_id * height * width * 3;
}

const StorageLine& StorageReport::line(const std::string& component) const {
  for (const auto& l : lines) {
    if (l.component == component) return l;
  }
  throw std::out_of_range("storage report has no line '" + component + "'");
}

std::int64_t StorageReport::per_domain_affine_bytes() const {
  return line("BN^(t)/affine").bytes + line("SA^(t)").bytes;
}

std::int64_t StorageReport::per_domain_snapshot_bytes() const {
  return line("BN^(t)/full").bytes + line("neck-BN^(t)").bytes + line("SA^(t)").bytes;
}

StorageReport storage_report(const BackboneGraph& graph, int domains,
                             std::int64_t classifier_classes, const ExemplarPolicy& exemplars) {
  std::int64_t conv = 0;
  std::int64_t body_bn_channels = 0;
  std::int64_t neck_channels = 0;
  std::int64_t sa = 0;
  for (const auto& l : graph.layers) {
    if (l.kind == LayerKind::conv) {
      conv += static_cast<std::int64_t>(l.in_channels) * l.out_channels * l.spatial.kernel *
              l.spatial.kernel;
      if (graph.sa_placement.count(l.index) != 0) {
        sa += sa_param_count(l.out_channels, graph.sa_kernel_size);
      }
    } else if (l.kind == LayerKind::bn) {
      body_bn_channels += l.out_channels;
    } else if (l.kind == LayerKind::neck_bn) {
      neck_channels += l.out_channels;
    }
  }
  auto values_line = [](std::string comp, std::string conv_name, std::int64_t values) {
    return StorageLine{std::move(comp), std::move(conv_name), values, values * kBytesPerValue};
  };
  StorageReport r;
  r.arch_id = graph.arch_id;
  r.domains = domains;
  const std::int64_t backbone = conv + 2 * body_bn_channels;
  r.lines.push_back(values_line("Backbone", "conv weights + BN affines, f32", backbone));
  r.lines.push_back(values_line("Classifier", "N x d, f32, no bias",
                                classifier_classes * graph.feature_dim));
  r.lines.push_back({"Exemplars", "uint8 pixels, steps x ids x images x HxWx3", 0,
                     exemplars.bytes()});
  r.lines.push_back(values_line("BN^(t)/full", "mean, var, gamma, beta per channel, f32",
                                4 * body_bn_channels));
  r.lines.push_back(values_line("BN^(t)/affine", "gamma, beta per channel, f32",
                                2 * body_bn_channels));
  r.lines.push_back(values_line("neck-BN^(t)", "mean, var, gamma, beta, f32", 4 * neck_channels));
  r.lines.push_back(values_line("SA^(t)", "M x k x k per placed conv, f32", sa));
  const std::int64_t snap = r.per_domain_snapshot_bytes();
  const std::int64_t affine = r.per_domain_affine_bytes();
  r.lines.push_back({"DASA per-domain", "snapshot payload (full BN + neck + SA)", 0, snap});
  r.lines.push_back({"DASA cumulative", "domains x snapshot payload", 0, snap * domains});
  r.lines.push_back({"DASA cumulative/affine", "domains x (affine BN + SA)", 0, affine * domains});
  r.lines.push_back({"KD baseline", "backbone + classifier + exemplars", 0,
                     r.line("Backbone").bytes + r.line("Classifier").bytes +
                         r.line("Exemplars").bytes});
  return r;
}

std::string format_storage_table(const StorageReport& r) {
  std::ostringstream os;
  char buf[256];
  std::snprintf(buf, sizeof(buf), "storage report: arch=%s domains=%d\n", r.arch_id.c_str(),
                r.domains);
  os << buf;
  std::snprintf(buf, sizeof(buf), "%-24s %14s %14s %12s  %s\n", "component", "values", "bytes",
                "MiB", "convention");
  os << buf;
  for (const auto& l : r.lines) {
    std::snprintf(buf, sizeof(buf), "%-24s %14lld %14lld %12.3f  %s\n", l.component.c_str(),
                  static_cast<long long>(l.values), static_cast<long long>(l.bytes), l.mib(),
                  l.convention.c_str());
    os << buf;
  }
  return os.str();
}

}  // namespace lreid
