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

#include "lreid/kd_baseline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>

namespace lreid {

namespace fs = std::filesystem;

int ExemplarBuffer::identity_count(int domain_ordinal) const {
  std::set<int> ids;
  for (const auto& e : entries) {
    if (e.domain_ordinal == domain_ordinal) ids.insert(e.identity);
  }
  return static_cast<int>(ids.size());
}

std::int64_t ExemplarBuffer::bytes() const {
  std::int64_t total = 0;
  for (const auto& e : entries) total += static_cast<std::int64_t>(e.image.pixels.size());
  return total;
}

void ExemplarBuffer::save(const std::string& dir) const {
  fs::create_directories(dir);
  std::ofstream manifest(fs::path(dir) / "manifest.csv");
  if (!manifest) throw std::runtime_error("cannot write exemplar manifest in '" + dir + "'");
  manifest << "# ids_per_step=" << ids_per_step << " images_per_id=" << images_per_id << "\n";
  manifest << "path,identity,label,domain,camera\n";
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    std::ostringstream name;
    name << "d" << e.domain_ordinal << "_" << e.identity << "_" << i << ".png";
    write_image((fs::path(dir) / name.str()).string(), e.image);
    manifest << name.str() << "," << e.identity << "," << e.label << "," << e.domain_ordinal << ","
             << e.camera << "\n";
  }
}

ExemplarBuffer ExemplarBuffer::load(const std::string& dir) {
  std::ifstream manifest(fs::path(dir) / "manifest.csv");
  if (!manifest) throw std::runtime_error("no exemplar manifest in '" + dir + "'");
  ExemplarBuffer buf;
  std::string line;
  while (std::getline(manifest, line)) {
    if (line.empty()) continue;
    if (line.front() == '#') {
      std::sscanf(line.c_str(), "# ids_per_step=%d images_per_id=%d", &buf.ids_per_step,
                  &buf.images_per_id);
      continue;
    }
    if (line.rfind("path,", 0) == 0) continue;
    std::stringstream ss(line);
    std::string path, identity, label, domain, camera;
    std::getline(ss, path, ',');
    std::getline(ss, identity, ',');
    std::getline(ss, label, ',');
    std::getline(ss, domain, ',');
    std::getline(ss, camera);
    ExemplarEntry e;
    e.identity = std::stoi(identity);
    e.label = std::stoi(label);
    e.domain_ordinal = std::stoi(domain);
    e.camera = camera;
    e.image = read_image((fs::path(dir) / path).string(), 0, 0);
    buf.entries.push_back(std::move(e));
  }
  return buf;
}

std::vector<ExemplarEntry> select_exemplars(const DatasetSpec& dataset, int ids_per_step,
                                            int images_per_id, std::uint64_t seed,
                                            int domain_ordinal, int label_offset) {
  require(ids_per_step > 0 && images_per_id > 0, "exemplar policy counts must be positive");
  std::map<int, std::vector<int>> by_label;
  for (std::size_t i = 0; i < dataset.train.size(); ++i) {
    by_label[dataset.train[i].label].push_back(static_cast<int>(i));
  }
  std::vector<int> labels;
  for (const auto& [label, idx] : by_label) labels.push_back(label);
  std::mt19937_64 rng(seed);
  std::vector<int> chosen;
  std::sample(labels.begin(), labels.end(), std::back_inserter(chosen),
              std::min<std::size_t>(static_cast<std::size_t>(ids_per_step), labels.size()), rng);
  std::vector<ExemplarEntry> out;
  for (int label : chosen) {
    const auto& idx = by_label[label];
    std::vector<int> picks;
    std::sample(idx.begin(), idx.end(), std::back_inserter(picks),
                std::min<std::size_t>(static_cast<std::size_t>(images_per_id), idx.size()), rng);
    for (int i : picks) {
      const auto& r = dataset.train[i];
      out.push_back({r.image, r.identity, label_offset + r.label, domain_ordinal, r.camera});
    }
  }
  return out;
}

ClassifierHead expand_classifier(const ClassifierHead& old_head, const Tensor& features,
                                 std::span<const int> labels, int new_classes) {
  require(new_classes > 0, "expand_classifier: no new classes");
  require(features.n == static_cast<int>(labels.size()) && features.h == 1 && features.w == 1,
          "expand_classifier: features must be n x d matching the labels");
  const int d = features.c;
  require(old_head.classes == 0 || old_head.dim == d, "expand_classifier: feature dim mismatch");
  std::vector<double> sums(static_cast<std::size_t>(new_classes) * d, 0.0);
  std::vector<int> counts(new_classes, 0);
  for (int b = 0; b < features.n; ++b) {
    const int l = labels[b];
    require(l >= 1 && l <= new_classes, "expand_classifier: label out of range");
    ++counts[l - 1];
    for (int j = 0; j < d; ++j) {
      sums[static_cast<std::size_t>(l - 1) * d + j] += features.data[static_cast<std::size_t>(b) * d + j];
    }
  }
  ClassifierHead head{old_head.classes + new_classes, d, old_head.weights};
  head.weights.reserve(static_cast<std::size_t>(head.classes) * d);
  for (int k = 0; k < new_classes; ++k) {
    if (counts[k] == 0) {
      throw std::invalid_argument("expand_classifier: new class " + std::to_string(k + 1) +
                                  " has no images");
    }
    double norm = 0.0;
    for (int j = 0; j < d; ++j) {
      const double m = sums[static_cast<std::size_t>(k) * d + j] / counts[k];
      norm += m * m;
    }
    norm = std::sqrt(norm);
    for (int j = 0; j < d; ++j) {
      const double m = sums[static_cast<std::size_t>(k) * d + j] / counts[k];
      head.weights.push_back(static_cast<float>(norm > 0.0 ? m / norm : 0.0));
    }
  }
  return head;
}

ClassifierHead expand_classifier(const ClassifierHead& old_head, const DatasetSpec& dataset,
                                 const Network& student) {
  require(!dataset.train.empty(), "expand_classifier: dataset has no training images");
  const int d = student.graph().feature_dim;
  Tensor all(static_cast<int>(dataset.train.size()), d, 1, 1);
  constexpr std::size_t kBatch = 64;
  for (std::size_t s = 0; s < dataset.train.size(); s += kBatch) {
    const std::size_t e = std::min(dataset.train.size(), s + kBatch);
    std::vector<const Image*> imgs;
    for (std::size_t i = s; i < e; ++i) imgs.push_back(&dataset.train[i].image);
    const Tensor f = student.forward_eval(to_tensor(imgs));
    std::copy(f.data.begin(), f.data.end(),
              all.data.begin() + static_cast<std::ptrdiff_t>(s * static_cast<std::size_t>(d)));
  }
  return expand_classifier(old_head, all, dataset.train_labels(), dataset.train_id_count());
}

KdLossResult kd_loss(std::span<const double> teacher_logits, std::span<const double> student_logits,
                     int batch, int classes) {
  require(batch > 0 && classes > 0, "kd_loss: empty batch");
  const auto expected = static_cast<std::size_t>(batch) * classes;
  require(teacher_logits.size() == expected && student_logits.size() == expected,
          "kd_loss: teacher and student logits must both be B x N");
  KdLossResult r;
  r.dstudent.assign(expected, 0.0);
  std::vector<double> pt(classes);
  std::vector<double> log_ps(classes);
  for (int b = 0; b < batch; ++b) {
    const double* t = teacher_logits.data() + static_cast<std::size_t>(b) * classes;
    const double* s = student_logits.data() + static_cast<std::size_t>(b) * classes;
    const double tmax = *std::max_element(t, t + classes);
    const double smax = *std::max_element(s, s + classes);
    double tsum = 0.0;
    double ssum = 0.0;
    for (int k = 0; k < classes; ++k) {
      pt[k] = std::exp(t[k] - tmax);
      tsum += pt[k];
      ssum += std::exp(s[k] - smax);
    }
    const double log_ssum = std::log(ssum) + smax;
    double* g = r.dstudent.data() + static_cast<std::size_t>(b) * classes;
    for (int k = 0; k < classes; ++k) {
      pt[k] /= tsum;
      log_ps[k] = s[k] - log_ssum;
      if (pt[k] > 0.0) r.loss -= pt[k] * log_ps[k];
      g[k] = (std::exp(log_ps[k]) - pt[k]) / batch;
    }
  }
  r.loss /= batch;
  if (!std::isfinite(r.loss)) throw std::runtime_error("kd_loss: non-finite value");
  return r;
}

namespace {

Tensor gather_rows(const Tensor& x, const std::vector<int>& rows) {
  Tensor out(static_cast<int>(rows.size()), x.c, x.h, x.w);
  const std::size_t plane = static_cast<std::size_t>(x.c) * x.h * x.w;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy_n(x.data.begin() + static_cast<std::ptrdiff_t>(rows[i] * plane), plane,
                out.data.begin() + static_cast<std::ptrdiff_t>(i * plane));
  }
  return out;
}

struct TrainItem {
  const Image* image;
  int label;
  bool exemplar;
};

}  // namespace

KdStepResult train_domain_kd(KdModel& model, const DatasetSpec& dataset, ExemplarBuffer& buffer,
                             const TrainConfig& config, const KdConfig& kd, int domain_ordinal,
                             const EpochLogger& log) {
  config.validate();
  require(!dataset.train.empty(), "dataset '" + dataset.name + "' has no training images");
  require(kd.lambda_kd >= 0.0, "lambda_kd must be nonnegative");
  Network& net = model.network;
  net.set_conv_frozen(false);
  const int dim = net.graph().feature_dim;
  const int offset = model.head.classes;
  const bool first = offset == 0;

  std::mt19937_64 rng(config.seed * 6364136223846793005ULL + 1442695040888963407ULL +
                      static_cast<std::uint64_t>(domain_ordinal));

  std::optional<FrozenTeacher> teacher;
  if (!first && kd.lambda_kd > 0.0) teacher = FrozenTeacher{net, model.head};
  model.head = first ? ClassifierHead::random(dataset.train_id_count(), dim, rng())
                     : expand_classifier(model.head, dataset, net);
  if (teacher && kd.head_mode == KdHeadMode::expanded) teacher->head = model.head;
  const int kd_classes = teacher ? teacher->head.classes : 0;
  if (teacher && kd.head_mode == KdHeadMode::old_classes) {
    require(kd_classes == offset, "teacher/student class count mismatch after expansion");
  }

  std::vector<TrainItem> items;
  for (const auto& r : dataset.train) items.push_back({&r.image, offset + r.label, false});
  if (kd.replay) {
    for (const auto& e : buffer.entries) {
      require(e.label >= 1 && e.label <= offset, "exemplar label outside the old classes");
      items.push_back({&e.image, e.label, true});
    }
  }
  std::vector<int> labels;
  for (const auto& it : items) labels.push_back(it.label);

  Gradients grads = net.make_gradients();
  std::vector<float> head_grad(model.head.weights.size(), 0.0f);
  std::vector<ParamView> params = net.trainable(grads);
  params.push_back({"classifier", model.head.weights, head_grad});
  Adam adam;

  KdStepResult result;
  const int n_cls = model.head.classes;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = lr_at_epoch(epoch, config, first);
    auto pk = pk_sample_epoch(labels, config.batch_size, config.instances_per_id, rng);
    double loss_sum = 0.0;
    int correct = 0;
    int seen = 0;
    for (const auto& batch : pk.batches) {
      const int bsz = static_cast<int>(batch.size());
      std::vector<const Image*> images;
      std::vector<int> batch_labels;
      std::vector<int> distill_rows;
      for (int i = 0; i < bsz; ++i) {
        const auto& it = items[batch[i]];
        images.push_back(it.image);
        batch_labels.push_back(it.label);
        if (it.exemplar || kd.distill_new_samples) distill_rows.push_back(i);
      }
      const Tensor x = make_batch(images, config.augment, true, rng);
      ForwardTrace trace;
      const Tensor feats = net.forward(x, Mode::train, &trace);
      const auto logits = model.head.logits(feats);
      auto ce = softmax_cross_entropy(logits, bsz, n_cls, batch_labels, config.label_smoothing);
      double loss = ce.loss;
      std::vector<double>& dlogits = ce.dlogits;

      if (teacher && !distill_rows.empty()) {
        const int bk = static_cast<int>(distill_rows.size());
        const Tensor tfeat = teacher->network.forward_eval(gather_rows(x, distill_rows));
        const auto tlog_full = teacher->head.logits(tfeat);
        std::vector<double> tlog(static_cast<std::size_t>(bk) * kd_classes);
        std::vector<double> slog(static_cast<std::size_t>(bk) * kd_classes);
        for (int i = 0; i < bk; ++i) {
          for (int k = 0; k < kd_classes; ++k) {
            tlog[static_cast<std::size_t>(i) * kd_classes + k] =
                tlog_full[static_cast<std::size_t>(i) * teacher->head.classes + k];
            slog[static_cast<std::size_t>(i) * kd_classes + k] =
                logits[static_cast<std::size_t>(distill_rows[i]) * n_cls + k];
          }
        }
        const auto kl = kd_loss(tlog, slog, bk, kd_classes);
        loss += kd.lambda_kd * kl.loss;
        for (int i = 0; i < bk; ++i) {
          for (int k = 0; k < kd_classes; ++k) {
            dlogits[static_cast<std::size_t>(distill_rows[i]) * n_cls + k] +=
                kd.lambda_kd * kl.dstudent[static_cast<std::size_t>(i) * kd_classes + k];
          }
        }
      }
      if (!std::isfinite(loss)) {
        throw std::runtime_error("non-finite loss on domain '" + dataset.name + "' epoch " +
                                 std::to_string(epoch));
      }

      Tensor dfeat(bsz, dim, 1, 1);
      std::fill(head_grad.begin(), head_grad.end(), 0.0f);
      for (int b = 0; b < bsz; ++b) {
        const double* z = logits.data() + static_cast<std::size_t>(b) * n_cls;
        if (std::max_element(z, z + n_cls) - z == batch_labels[b] - 1) ++correct;
        const float* f = feats.data.data() + static_cast<std::size_t>(b) * dim;
        float* df = dfeat.data.data() + static_cast<std::size_t>(b) * dim;
        for (int k = 0; k < n_cls; ++k) {
          const auto g = static_cast<float>(dlogits[static_cast<std::size_t>(b) * n_cls + k]);
          if (g == 0.0f) continue;
          const float* w = model.head.weights.data() + static_cast<std::size_t>(k) * dim;
          float* dw = head_grad.data() + static_cast<std::size_t>(k) * dim;
          for (int j = 0; j < dim; ++j) {
            df[j] += g * w[j];
            dw[j] += g * f[j];
          }
        }
      }
      grads.zero();
      net.backward(trace, dfeat, grads);
      adam.step(params, lr, config.weight_decay);
      loss_sum += loss * bsz;
      seen += bsz;
    }
    EpochMetrics m{dataset.name, epoch, lr, seen ? loss_sum / seen : 0.0,
                   seen ? static_cast<double>(correct) / seen : 0.0};
    result.history.push_back(m);
    if (log) log(m);
  }

  if (kd.replay) {
    auto added = select_exemplars(dataset, buffer.ids_per_step, buffer.images_per_id, rng(),
                                  domain_ordinal, offset);
    result.exemplars_added = static_cast<int>(added.size());
    for (auto& e : added) buffer.entries.push_back(std::move(e));
  }
  return result;
}

}  // namespace lreid
