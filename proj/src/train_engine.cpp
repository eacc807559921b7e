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

#include "lreid/train_engine.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"

namespace lreid {

void TrainConfig::validate() const {
  require(instances_per_id > 0 && batch_size > 0 && batch_size % instances_per_id == 0,
          "batch_size must be a positive multiple of instances_per_id");
  require(epochs > 0, "epochs must be positive");
  require(warmup_epochs >= 0, "warmup_epochs must be nonnegative");
  require(first_decay_epoch >= warmup_epochs && later_decay_epoch >= warmup_epochs,
          "decay epochs must not precede the end of warmup");
  require(base_lr > 0.0 && warmup_start_lr > 0.0, "learning rates must be positive");
  require(label_smoothing >= 0.0 && label_smoothing < 1.0, "label smoothing must be in [0,1)");
  require(input_height > 0 && input_width > 0, "input size must be positive");
}

TrainConfig parse_train_config(const std::string& json_text) {
  const auto j = nlohmann::json::parse(json_text);
  TrainConfig c;
  if (j.contains("train")) {
    const auto& t = j.at("train");
    c.batch_size = t.value("batch_size", c.batch_size);
    c.instances_per_id = t.value("instances_per_id", c.instances_per_id);
    c.epochs = t.value("epochs", c.epochs);
    c.base_lr = t.value("base_lr", c.base_lr);
    c.warmup_start_lr = t.value("warmup_start_lr", c.warmup_start_lr);
    c.warmup_epochs = t.value("warmup_epochs", c.warmup_epochs);
    c.first_decay_epoch = t.value("first_decay_epoch", c.first_decay_epoch);
    c.later_decay_epoch = t.value("later_decay_epoch", c.later_decay_epoch);
    c.decay_factor = t.value("decay_factor", c.decay_factor);
    c.weight_decay = t.value("weight_decay", c.weight_decay);
    c.label_smoothing = t.value("label_smoothing", c.label_smoothing);
    c.input_height = t.value("input_height", c.input_height);
    c.input_width = t.value("input_width", c.input_width);
    c.seed = t.value("seed", c.seed);
  }
  if (j.contains("augment")) {
    const auto& a = j.at("augment");
    auto& f = c.augment;
    f.flip = a.value("flip", f.flip);
    f.pad_crop = a.value("pad_crop", f.pad_crop);
    f.erase = a.value("erase", f.erase);
    f.pad = a.value("pad", f.pad);
    f.flip_prob = a.value("flip_prob", f.flip_prob);
    f.erase_prob = a.value("erase_prob", f.erase_prob);
    f.erase_area_min = a.value("erase_area_min", f.erase_area_min);
    f.erase_area_max = a.value("erase_area_max", f.erase_area_max);
    f.erase_aspect_min = a.value("erase_aspect_min", f.erase_aspect_min);
  }
  c.validate();
  return c;
}

TrainConfig load_train_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_train_config(ss.str());
}

// ---------------------------------------------------------------------------
// Sampling

PkEpoch pk_sample_epoch(std::span<const int> labels, int batch_size, int instances_per_id,
                        std::mt19937_64& rng) {
  require(instances_per_id > 0 && batch_size % instances_per_id == 0,
          "batch_size must be a multiple of instances_per_id");
  const int k = instances_per_id;
  std::map<int, std::vector<int>> by_id;
  for (std::size_t i = 0; i < labels.size(); ++i) by_id[labels[i]].push_back(static_cast<int>(i));
  PkEpoch out;
  if (by_id.empty()) return out;

  int p = batch_size / k;
  if (static_cast<int>(by_id.size()) < p) {
    out.warning = "only " + std::to_string(by_id.size()) + " identities for " + std::to_string(p) +
                  " per batch; shrinking batches to " + std::to_string(by_id.size() * k);
    p = static_cast<int>(by_id.size());
  }

  std::map<int, std::vector<std::vector<int>>> chunks;
  for (auto& [id, idxs] : by_id) {
    std::vector<int> pool = idxs;
    if (static_cast<int>(pool.size()) < k) {
      std::uniform_int_distribution<std::size_t> pick(0, idxs.size() - 1);
      pool.clear();
      for (int i = 0; i < k; ++i) pool.push_back(idxs[pick(rng)]);
    }
    std::shuffle(pool.begin(), pool.end(), rng);
    auto& list = chunks[id];
    for (std::size_t s = 0; s + k <= pool.size(); s += k) {
      list.emplace_back(pool.begin() + static_cast<std::ptrdiff_t>(s),
                        pool.begin() + static_cast<std::ptrdiff_t>(s + k));
    }
  }

  std::vector<int> available;
  for (const auto& [id, list] : chunks) {
    if (!list.empty()) available.push_back(id);
  }
  while (static_cast<int>(available.size()) >= p) {
    std::vector<int> chosen;
    std::sample(available.begin(), available.end(), std::back_inserter(chosen), p, rng);
    std::shuffle(chosen.begin(), chosen.end(), rng);
    std::vector<int> batch;
    for (int id : chosen) {
      auto& list = chunks[id];
      batch.insert(batch.end(), list.back().begin(), list.back().end());
      list.pop_back();
      if (list.empty()) available.erase(std::find(available.begin(), available.end(), id));
    }
    out.batches.push_back(std::move(batch));
  }
  return out;
}

Image augment(const Image& image, const AugmentFlags& flags, std::mt19937_64& rng,
              AugmentTrace* trace) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  AugmentTrace t;
  Image out = image;
  const int h = image.height;
  const int w = image.width;
  if (flags.flip && u01(rng) < flags.flip_prob) {
    t.flipped = true;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        for (int c = 0; c < 3; ++c) out.at(y, x, c) = image.at(y, w - 1 - x, c);
      }
    }
  }
  if (flags.pad_crop && flags.pad > 0) {
    std::uniform_int_distribution<int> off(0, 2 * flags.pad);
    t.crop_y = off(rng);
    t.crop_x = off(rng);
    Image cropped(h, w, 0);
    for (int y = 0; y < h; ++y) {
      const int sy = y + t.crop_y - flags.pad;
      if (sy < 0 || sy >= h) continue;
      for (int x = 0; x < w; ++x) {
        const int sx = x + t.crop_x - flags.pad;
        if (sx < 0 || sx >= w) continue;
        for (int c = 0; c < 3; ++c) cropped.at(y, x, c) = out.at(sy, sx, c);
      }
    }
    out = std::move(cropped);
  }
  if (flags.erase && u01(rng) < flags.erase_prob) {
    const double area = static_cast<double>(h) * w;
    std::uniform_real_distribution<double> frac(flags.erase_area_min, flags.erase_area_max);
    std::uniform_real_distribution<double> log_aspect(std::log(flags.erase_aspect_min),
                                                      -std::log(flags.erase_aspect_min));
    for (int attempt = 0; attempt < 100; ++attempt) {
      const double target = frac(rng) * area;
      const double aspect = std::exp(log_aspect(rng));
      const int eh = static_cast<int>(std::lround(std::sqrt(target * aspect)));
      const int ew = static_cast<int>(std::lround(std::sqrt(target / aspect)));
      if (eh <= 0 || ew <= 0 || eh >= h || ew >= w) continue;
      const double got = static_cast<double>(eh) * ew / area;
      if (got < flags.erase_area_min || got > flags.erase_area_max) continue;
      std::uniform_int_distribution<int> py(0, h - eh);
      std::uniform_int_distribution<int> px(0, w - ew);
      std::uniform_int_distribution<int> value(0, 255);
      t.erased = true;
      t.erase_y = py(rng);
      t.erase_x = px(rng);
      t.erase_h = eh;
      t.erase_w = ew;
      for (int y = t.erase_y; y < t.erase_y + eh; ++y) {
        for (int x = t.erase_x; x < t.erase_x + ew; ++x) {
          for (int c = 0; c < 3; ++c) out.at(y, x, c) = static_cast<std::uint8_t>(value(rng));
        }
      }
      break;
    }
  }
  if (trace != nullptr) *trace = t;
  return out;
}

// ---------------------------------------------------------------------------
// Loss

ClassifierHead ClassifierHead::random(int classes, int dim, std::uint64_t seed) {
  require(classes > 0 && dim > 0, "classifier needs positive dimensions");
  ClassifierHead h{classes, dim, {}};
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 0.001);
  h.weights.resize(static_cast<std::size_t>(classes) * dim);
  for (auto& v : h.weights) v = static_cast<float>(dist(rng));
  return h;
}

std::vector<double> ClassifierHead::logits(const Tensor& features) const {
  require(features.c == dim && features.h == 1 && features.w == 1,
          "classifier expects B x " + std::to_string(dim) + " features, got " +
              features.shape_str());
  std::vector<double> out(static_cast<std::size_t>(features.n) * classes, 0.0);
  for (int b = 0; b < features.n; ++b) {
    const float* f = features.data.data() + static_cast<std::size_t>(b) * dim;
    for (int k = 0; k < classes; ++k) {
      const float* wrow = weights.data() + static_cast<std::size_t>(k) * dim;
      double acc = 0.0;
      for (int d = 0; d < dim; ++d) acc += static_cast<double>(f[d]) * wrow[d];
      out[static_cast<std::size_t>(b) * classes + k] = acc;
    }
  }
  return out;
}

LossResult softmax_cross_entropy(std::span<const double> logits, int batch, int classes,
                                 std::span<const int> labels, double smoothing) {
  require(batch > 0 && logits.size() == static_cast<std::size_t>(batch) * classes,
          "cross-entropy: logits shape mismatch");
  require(labels.size() == static_cast<std::size_t>(batch), "cross-entropy: label count mismatch");
  LossResult r;
  r.dlogits.assign(logits.size(), 0.0);
  const double off = smoothing / classes;
  const double on = 1.0 - smoothing + off;
  for (int b = 0; b < batch; ++b) {
    const int label = labels[b];
    require(label >= 1 && label <= classes, "label " + std::to_string(label) +
                                                " outside [1, " + std::to_string(classes) + "]");
    const double* z = logits.data() + static_cast<std::size_t>(b) * classes;
    const double zmax = *std::max_element(z, z + classes);
    double sum = 0.0;
    for (int k = 0; k < classes; ++k) sum += std::exp(z[k] - zmax);
    const double log_sum = std::log(sum) + zmax;
    double* g = r.dlogits.data() + static_cast<std::size_t>(b) * classes;
    for (int k = 0; k < classes; ++k) {
      const double target = k == label - 1 ? on : off;
      const double log_p = z[k] - log_sum;
      if (target > 0.0) r.loss -= target * log_p;
      g[k] = (std::exp(log_p) - target) / batch;
    }
  }
  r.loss /= batch;
  return r;
}

IdLossResult id_loss(const Tensor& features, const ClassifierHead& head,
                     std::span<const int> labels, double smoothing) {
  const auto logits = head.logits(features);
  auto ce = softmax_cross_entropy(logits, features.n, head.classes, labels, smoothing);
  IdLossResult r;
  r.loss = ce.loss;
  r.dfeatures = Tensor(features.n, head.dim, 1, 1);
  r.dweights.assign(head.weights.size(), 0.0f);
  for (int b = 0; b < features.n; ++b) {
    const double* z = logits.data() + static_cast<std::size_t>(b) * head.classes;
    if (std::max_element(z, z + head.classes) - z == labels[b] - 1) ++r.correct;
    const double* g = ce.dlogits.data() + static_cast<std::size_t>(b) * head.classes;
    const float* f = features.data.data() + static_cast<std::size_t>(b) * head.dim;
    float* df = r.dfeatures.data.data() + static_cast<std::size_t>(b) * head.dim;
    for (int k = 0; k < head.classes; ++k) {
      const float gk = static_cast<float>(g[k]);
      if (gk == 0.0f) continue;
      const float* wrow = head.weights.data() + static_cast<std::size_t>(k) * head.dim;
      float* dwrow = r.dweights.data() + static_cast<std::size_t>(k) * head.dim;
      for (int d = 0; d < head.dim; ++d) {
        df[d] += gk * wrow[d];
        dwrow[d] += gk * f[d];
      }
    }
  }
  return r;
}

double lr_at_epoch(int epoch, const TrainConfig& c, bool is_first_domain) {
  require(epoch >= 0, "epoch must be nonnegative");
  if (c.warmup_epochs > 0 && epoch <= c.warmup_epochs) {
    return c.warmup_start_lr +
           (c.base_lr - c.warmup_start_lr) * static_cast<double>(epoch) / c.warmup_epochs;
  }
  const int decay = is_first_domain ? c.first_decay_epoch : c.later_decay_epoch;
  return epoch >= decay ? c.base_lr * c.decay_factor : c.base_lr;
}

void Adam::step(std::span<const ParamView> params, double lr, double weight_decay) {
  if (m_.empty()) {
    for (const auto& p : params) {
      m_.emplace_back(p.value.size(), 0.0);
      v_.emplace_back(p.value.size(), 0.0);
    }
  }
  require(m_.size() == params.size(), "optimizer parameter inventory changed between steps");
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto value = params[i].value;
    auto grad = params[i].grad;
    auto& m = m_[i];
    auto& v = v_[i];
    require(m.size() == value.size(), "optimizer parameter '" + params[i].name + "' resized");
    for (std::size_t j = 0; j < value.size(); ++j) {
      const double g = static_cast<double>(grad[j]) + weight_decay * value[j];
      m[j] = beta1_ * m[j] + (1.0 - beta1_) * g;
      v[j] = beta2_ * v[j] + (1.0 - beta2_) * g * g;
      const double update = lr * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + eps_);
      value[j] = static_cast<float>(value[j] - update);
    }
  }
}

// ---------------------------------------------------------------------------
// Training loop

std::string to_json_line(const EpochMetrics& m) {
  nlohmann::json j{{"domain", m.domain},
                   {"epoch", m.epoch},
                   {"lr", m.lr},
                   {"loss", m.loss},
                   {"accuracy", m.accuracy}};
  return j.dump();
}

Tensor make_batch(const std::vector<const Image*>& images, const AugmentFlags& flags, bool train,
                  std::mt19937_64& rng) {
  if (!train) return to_tensor(images);
  std::vector<Image> augmented;
  augmented.reserve(images.size());
  for (const Image* img : images) augmented.push_back(augment(*img, flags, rng));
  return to_tensor(augmented);
}

DomainRun train_domain(Network& network, const DatasetSpec& dataset, const Bank& bank,
                       const TrainConfig& config, const EpochLogger& log) {
  config.validate();
  require(!dataset.train.empty(), "dataset '" + dataset.name + "' has no training images");
  require(network.conv_frozen(), "train_domain expects frozen conv layers");
  const bool first = bank.empty();
  const int ordinal = static_cast<int>(bank.size()) + 1;
  const auto labels = dataset.train_labels();
  const int n_ids = dataset.train_id_count();

  std::mt19937_64 rng(config.seed * 6364136223846793005ULL + 1442695040888963407ULL +
                      static_cast<std::uint64_t>(ordinal));
  ClassifierHead head = ClassifierHead::random(n_ids, network.graph().feature_dim, rng());
  Gradients grads = network.make_gradients();
  std::vector<float> head_grad(head.weights.size(), 0.0f);
  std::vector<ParamView> params = network.trainable(grads);
  params.push_back({"classifier", head.weights, head_grad});
  Adam adam;

  DomainRun run;
  for (const auto& p : params) run.optimizer_params += static_cast<std::int64_t>(p.value.size());

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = lr_at_epoch(epoch, config, first);
    auto pk = pk_sample_epoch(labels, config.batch_size, config.instances_per_id, rng);
    double loss_sum = 0.0;
    int correct = 0;
    int seen = 0;
    for (const auto& batch : pk.batches) {
      std::vector<const Image*> images;
      std::vector<int> batch_labels;
      for (int idx : batch) {
        images.push_back(&dataset.train[idx].image);
        batch_labels.push_back(labels[idx]);
      }
      const Tensor x = make_batch(images, config.augment, true, rng);
      ForwardTrace trace;
      const Tensor feats = network.forward(x, Mode::train, &trace);
      auto loss = id_loss(feats, head, batch_labels, config.label_smoothing);
      if (!std::isfinite(loss.loss)) {
        throw std::runtime_error("non-finite loss on domain '" + dataset.name + "' epoch " +
                                 std::to_string(epoch) + " (lr " + std::to_string(lr) + ")");
      }
      grads.zero();
      network.backward(trace, loss.dfeatures, grads);
      std::copy(loss.dweights.begin(), loss.dweights.end(), head_grad.begin());
      adam.step(params, lr, config.weight_decay);
      loss_sum += loss.loss * static_cast<double>(batch.size());
      correct += loss.correct;
      seen += static_cast<int>(batch.size());
    }
    EpochMetrics m{dataset.name, epoch, lr, seen ? loss_sum / seen : 0.0,
                   seen ? static_cast<double>(correct) / seen : 0.0};
    run.history.push_back(m);
    if (log) log(m);
  }

  std::set<std::string> cams;
  for (const auto& c : dataset.cameras()) cams.insert(c);
  run.snapshot = snapshot_capture(network, dataset.name, ordinal, std::move(cams));
  return run;
}

}  // namespace lreid
