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

#include "lreid/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace lreid::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json read_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open '" + path + "'");
  return json::parse(f);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write '" + path.string() + "'");
  f << text;
}

// Everything needed to rebuild the evaluated network from an artifact directory.
struct ArtifactInfo {
  std::string arch;
  std::string method;
  int input_height = 256;
  int input_width = 128;
};

void write_info(const fs::path& dir, const ArtifactInfo& info) {
  write_text(dir / "info.json", json{{"arch", info.arch},
                                     {"method", info.method},
                                     {"input_height", info.input_height},
                                     {"input_width", info.input_width}}
                                    .dump(2));
}

ArtifactInfo read_info(const fs::path& dir) {
  const auto j = read_json((dir / "info.json").string());
  return {j.at("arch"), j.at("method"), j.at("input_height"), j.at("input_width")};
}

struct LoadedArtifact {
  ArtifactInfo info;
  Network network;
  std::optional<Bank> bank;
};

LoadedArtifact load_artifact(const std::optional<std::string>& bank_dir,
                             const std::optional<std::string>& model_dir) {
  if (bank_dir.has_value() == model_dir.has_value()) {
    throw std::invalid_argument("pass exactly one of --bank or --model");
  }
  const fs::path dir = bank_dir ? *bank_dir : *model_dir;
  if (!fs::is_directory(dir)) throw std::runtime_error("artifact '" + dir.string() + "' not found");
  const ArtifactInfo info = read_info(dir);
  if (model_dir) {
    const auto weights = decode(read_file((dir / "model.dasa").string()));
    return {info, build_and_partition(info.arch, &weights).network, std::nullopt};
  }
  const auto weights = decode(read_file((dir / "backbone.dasa").string()));
  Network net = build_and_partition(info.arch, &weights).network;
  Bank bank = Bank::load(dir.string());
  if (bank.empty()) throw std::runtime_error("bank '" + dir.string() + "' holds no snapshots");
  const auto& first = bank.snapshots().front();
  if (!first.sa_layers.empty()) {
    SaPlacement p{SaPlacement::Mode::indices, {first.sa_layers.begin(), first.sa_layers.end()}};
    net.insert_sa(p, first.sa_kernels.front().kernel_size);
  }
  return {info, std::move(net), std::move(bank)};
}

TrainConfig config_from(const json& j) {
  json sub = json::object();
  for (const char* key : {"train", "augment"}) {
    if (j.contains(key)) sub[key] = j.at(key);
  }
  return parse_train_config(sub.dump());
}

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

}  // namespace

DatasetSpec load_dataset(const std::string& path, int height, int width) {
  const fs::path p(path);
  DatasetSpec spec;
  if (fs::is_directory(p / "query") || fs::is_directory(p / "train")) {
    spec = load_reid_directory(path);
  } else if (fs::exists(p / "manifest.csv")) {
    spec = load_manifest((p / "manifest.csv").string(), p.filename().string());
  } else {
    throw std::runtime_error("dataset '" + path + "' not found (no split directories or manifest)");
  }
  load_pixels(spec, height, width);
  return spec;
}

bool render_curve_svg(const std::vector<StepRecord>& steps, const std::string& path) {
  try {
    if (steps.empty()) return false;
    const double w = 420, h = 260, left = 50, right = 20, top = 20, bottom = 40;
    const double pw = w - left - right, ph = h - top - bottom;
    auto x_of = [&](std::size_t i) {
      return left + (steps.size() == 1 ? pw / 2 : pw * static_cast<double>(i) / (steps.size() - 1));
    };
    auto y_of = [&](double v) { return top + ph * (1.0 - v); };
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<line x1=\"" << left << "\" y1=\"" << top + ph << "\" x2=\"" << left + pw << "\" y2=\""
       << top + ph << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + ph
       << "\" stroke=\"black\"/>\n";
    for (int t = 0; t <= 4; ++t) {
      const double v = t / 4.0;
      os << "<text x=\"" << left - 8 << "\" y=\"" << y_of(v) + 4
         << "\" font-size=\"10\" text-anchor=\"end\">" << static_cast<int>(v * 100) << "</text>\n";
    }
    const std::pair<const char*, const char*> series[] = {{"mAP", "#1f77b4"}, {"R-1", "#d62728"}};
    for (const auto& [name, color] : series) {
      os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
      for (std::size_t i = 0; i < steps.size(); ++i) {
        const double v = std::string(name) == "mAP" ? steps[i].average.mAP : steps[i].average.rank1;
        os << x_of(i) << "," << y_of(v) << " ";
      }
      os << "\"/>\n";
    }
    for (std::size_t i = 0; i < steps.size(); ++i) {
      os << "<text x=\"" << x_of(i) << "\" y=\"" << h - 20 << "\" font-size=\"10\" text-anchor=\"middle\">"
         << steps[i].step << "</text>\n";
    }
    os << "<text x=\"" << left + 10 << "\" y=\"" << top + 12
       << "\" font-size=\"11\" fill=\"#1f77b4\">mean mAP</text>\n";
    os << "<text x=\"" << left + 80 << "\" y=\"" << top + 12
       << "\" font-size=\"11\" fill=\"#d62728\">mean R-1</text>\n";
    os << "</svg>\n";
    std::ofstream f(path);
    if (!f) return false;
    f << os.str();
    return static_cast<bool>(f);
  } catch (...) {
    return false;
  }
}

int cmd_synth(const SynthOptions& o, std::ostream& log) {
  const auto domains = synth_generate(o.config);
  fs::create_directories(o.out);
  for (const auto& d : domains) {
    write_dataset(d, o.out);
    log << "wrote " << d.name << ": " << d.train.size() << " train, " << d.query.size() << " query, "
        << d.gallery.size() << " gallery images\n";
  }
  return 0;
}

int cmd_pretrain(const PretrainOptions& o, std::ostream& log) {
  const json j = o.config.empty() ? json::object() : read_json(o.config);
  TrainConfig cfg = config_from(j);
  if (o.seed) cfg.seed = *o.seed;
  const auto ds = load_dataset(o.dataset, cfg.input_height, cfg.input_width);
  const auto weights = pretrain_backbone(o.arch, ds, cfg, cfg.seed, [&](const EpochMetrics& m) {
    log << to_json_line(m) << "\n";
  });
  if (const auto parent = fs::path(o.out).parent_path(); !parent.empty()) fs::create_directories(parent);
  write_file(o.out, encode(weights));
  log << "wrote " << o.out << "\n";
  return 0;
}

int cmd_train_sequence(const TrainSequenceOptions& o, std::ostream& log) {
  const json j = o.config.empty() ? json::object() : read_json(o.config);
  const json seq = j.value("sequence", json::object());

  SequenceOptions so;
  so.train = config_from(j);
  so.method = parse_method(o.method.value_or(seq.value("method", std::string("dasa"))));
  so.arch = o.arch.value_or(seq.value("arch", std::string("tiny")));
  so.kernel_size = o.kernel_size.value_or(seq.value("kernel_size", kDefaultSaKernel));
  so.sa_placement = o.sa_placement.value_or(seq.value("sa_placement", std::string("all")));
  so.metric = parse_metric(o.metric.value_or(seq.value("metric", std::string("cosine"))));
  so.exemplar_ids = seq.value("exemplar_ids", so.exemplar_ids);
  so.exemplar_images = seq.value("exemplar_images", so.exemplar_images);
  so.kd.lambda_kd = seq.value("lambda_kd", so.kd.lambda_kd);
  so.kd.distill_new_samples = seq.value("distill_new_samples", so.kd.distill_new_samples);
  if (seq.value("head_mode", std::string("expanded")) == "old_classes") {
    so.kd.head_mode = KdHeadMode::old_classes;
  }
  if (o.seed) so.train.seed = *o.seed;
  so.init_seed = so.train.seed;
  const std::string order_name = o.order.value_or(seq.value("order", std::string()));
  if (order_name.empty()) throw std::invalid_argument("no sequence order given (--order)");
  const auto order = sequence_config(order_name);
  const std::string data_root = o.data_root.value_or(seq.value("data_root", std::string(".")));
  const auto pretrained_path = o.pretrained ? o.pretrained
                               : seq.contains("pretrained")
                                   ? std::optional<std::string>(seq.at("pretrained").get<std::string>())
                                   : std::nullopt;

  std::optional<NamedArrays> pretrained;
  if (pretrained_path) pretrained = decode(read_file(*pretrained_path));
  so.pretrained = pretrained ? &*pretrained : nullptr;

  std::vector<DatasetSpec> domains;
  for (const auto& step : order.steps) {
    domains.push_back(load_dataset((fs::path(data_root) / step.dataset).string(),
                                   so.train.input_height, so.train.input_width));
    for (const auto& w : domains.back().warnings) log << "warning: " << w << "\n";
  }

  const fs::path out(o.out);
  fs::create_directories(out);
  const fs::path artifact = out / (so.method == Method::dasa ? "bank" : "model");
  fs::create_directories(artifact);
  const ArtifactInfo info{so.arch, to_string(so.method), so.train.input_height, so.train.input_width};

  std::ofstream metrics(out / "metrics.jsonl");
  int current_step = 1;
  so.log = [&](const EpochMetrics& m) {
    json line = json::parse(to_json_line(m));
    line["step"] = current_step;
    metrics << line.dump() << "\n";
    metrics.flush();
  };

  json manifest{{"config", o.config},
                {"order", order_name},
                {"method", to_string(so.method)},
                {"seed", so.train.seed},
                {"pretrained", pretrained_path.value_or("")},
                {"artifact", artifact.filename().string()},
                {"metrics_log", "metrics.jsonl"},
                {"curve", "curve.csv"},
                {"steps", json::array()}};
  write_text(out / "run_manifest.json", manifest.dump(2));

  std::ofstream curve(out / "curve.csv");
  curve << "step,domain_count,mean_mAP,mean_R1\n";
  curve.flush();

  bool backbone_written = false;
  const auto on_step = [&](const SequenceState& st, const StepRecord& rec) {
    if (so.method == Method::dasa) {
      if (!backbone_written) {
        // Frozen convs and the pre-trained BN values the bank snapshots replace.
        Network frozen = build_and_partition(so.arch, so.pretrained, so.init_seed).network;
        write_file((artifact / "backbone.dasa").string(), encode(frozen.export_weights()));
        backbone_written = true;
      }
      st.bank.save(artifact.string());
    } else {
      write_file((artifact / "model.dasa").string(), encode(st.network.export_weights()));
      if (so.method == Method::kd) st.buffer.save((out / "exemplars").string());
    }
    write_info(artifact, info);

    EvalReport report{rec.seen, rec.average, {}};
    const std::string report_name = "eval_step" + std::to_string(rec.step) + ".json";
    write_text(out / report_name, to_json(report));
    curve << rec.step << "," << rec.seen.size() << "," << fmt_double(rec.average.mAP) << ","
          << fmt_double(rec.average.rank1) << "\n";
    curve.flush();
    manifest["steps"].push_back(
        {{"step", rec.step}, {"domain", rec.domain}, {"eval_report", report_name}});
    write_text(out / "run_manifest.json", manifest.dump(2));

    log << "step " << rec.step << " (" << rec.domain << "):";
    for (const auto& d : rec.seen) {
      log << " " << d.domain << " mAP " << fmt_double(100 * d.result.mAP) << " R-1 "
          << fmt_double(100 * d.result.rank1());
    }
    log << " | mean mAP " << fmt_double(100 * rec.average.mAP) << " mean R-1 "
        << fmt_double(100 * rec.average.rank1) << "\n";
    ++current_step;
  };

  const auto st = run_sequence(domains, so, on_step);
  if (!render_curve_svg(st.steps, (out / "curve.svg").string())) {
    log << "warning: curve rendering failed; curve.csv is complete\n";
  }
  return 0;
}

int cmd_eval(const EvalOptions& o, std::ostream& log) {
  if (o.datasets.empty()) throw std::invalid_argument("no dataset given (--dataset)");
  auto art = load_artifact(o.bank, o.model);
  const Metric metric = parse_metric(o.metric);
  SnapshotQuery override_query;
  if (o.domain) {
    if (!art.bank) throw std::invalid_argument("--domain needs a --bank artifact");
    override_query.domain_ordinal = *o.domain;
  }
  EvalReport report;
  for (const auto& path : o.datasets) {
    const auto ds = load_dataset(path, art.info.input_height, art.info.input_width);
    report.domains.push_back(evaluate_domain(art.network, art.bank ? &*art.bank : nullptr, ds,
                                             metric, override_query));
    const auto& d = report.domains.back();
    log << d.domain << ": mAP " << fmt_double(100 * d.result.mAP) << " R-1 "
        << fmt_double(100 * d.result.rank1()) << " (" << d.result.valid_queries << " queries, "
        << d.result.skipped_queries << " skipped";
    if (!d.snapshots_used.empty()) {
      log << ", snapshot";
      for (int s : d.snapshots_used) log << " " << s;
    }
    log << ")\n";
  }
  report.average = average_seen(report.domains);
  log << "mean mAP " << fmt_double(100 * report.average.mAP) << " mean R-1 "
      << fmt_double(100 * report.average.rank1) << "\n";
  if (o.out) write_text(*o.out, to_json(report));
  return 0;
}

int cmd_report_storage(const StorageOptions& o, std::ostream& log) {
  ExemplarPolicy policy = o.exemplars;
  if (o.bank) {
    const fs::path dir(*o.bank);
    const Bank bank = Bank::load(dir.string());
    if (bank.empty()) throw std::runtime_error("bank '" + dir.string() + "' holds no snapshots");
    const auto& snap = bank.snapshots().front();
    BackboneGraph g = build_graph(bank.arch_id());
    if (!snap.sa_layers.empty()) {
      g = insert_sa(g, {SaPlacement::Mode::indices, {snap.sa_layers.begin(), snap.sa_layers.end()}},
                    snap.sa_kernels.front().kernel_size);
    }
    policy.steps = static_cast<int>(bank.size());
    const auto r = storage_report(g, static_cast<int>(bank.size()), o.classes, policy);
    log << format_storage_table(r);
    log << "bank files: " << bank.size() << " snapshots of " << serialize(snap).size()
        << " bytes each (payload " << r.per_domain_snapshot_bytes() << ")\n";
    return 0;
  }
  const BackboneGraph g =
      insert_sa(build_graph(o.arch), SaPlacement::parse(o.sa_placement), o.kernel_size);
  policy.steps = o.domains;
  log << format_storage_table(storage_report(g, o.domains, o.classes, policy));
  return 0;
}

int cmd_heatmap(const HeatmapOptions& o, std::ostream& log) {
  if (o.images.empty()) throw std::invalid_argument("no image given (--image)");
  auto art = load_artifact(o.bank, o.model);
  fs::create_directories(o.out);
  for (const auto& path : o.images) {
    const Image img = read_image(path, art.info.input_height, art.info.input_width);
    if (art.bank) {
      SnapshotQuery q;
      if (o.domain) {
        q.domain_ordinal = *o.domain;
      } else if (const auto parsed = parse_reid_filename(fs::path(path).filename().string())) {
        // Camera ids are namespaced by the dataset directory two levels up.
        const auto ds_name = fs::path(path).parent_path().parent_path().filename().string();
        q.camera_id = ds_name + ":c" + std::to_string(parsed->camera);
      }
      art.network.apply(select_snapshot(*art.bank, q));
    }
    const auto map = attention_map(art.network, img);
    const auto target = fs::path(o.out) / (fs::path(path).stem().string() + "_heat.png");
    write_heatmap(target.string(), map, img.height, img.width);
    log << "wrote " << target.string() << "\n";
  }
  return 0;
}

}  // namespace lreid::cli
