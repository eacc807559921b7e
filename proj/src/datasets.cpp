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

#include "lreid/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <regex>
#include <set>
#include <sstream>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace lreid {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Image I/O

Image read_image(const std::string& path, int height, int width) {
  cv::Mat bgr = cv::imread(path, cv::IMREAD_COLOR);
  if (bgr.empty()) throw std::runtime_error("cannot decode image '" + path + "'");
  if (height <= 0 || width <= 0) {
    height = bgr.rows;
    width = bgr.cols;
  }
  if (bgr.rows != height || bgr.cols != width) {
    cv::resize(bgr, bgr, cv::Size(width, height), 0, 0, cv::INTER_LINEAR);
  }
  Image img(height, width);
  for (int y = 0; y < height; ++y) {
    const auto* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < width; ++x) {
      img.at(y, x, 0) = row[x][2];
      img.at(y, x, 1) = row[x][1];
      img.at(y, x, 2) = row[x][0];
    }
  }
  return img;
}

void write_image(const std::string& path, const Image& image) {
  cv::Mat bgr(image.height, image.width, CV_8UC3);
  for (int y = 0; y < image.height; ++y) {
    auto* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < image.width; ++x) {
      row[x] = cv::Vec3b(image.at(y, x, 2), image.at(y, x, 1), image.at(y, x, 0));
    }
  }
  if (!cv::imwrite(path, bgr)) throw std::runtime_error("cannot write image '" + path + "'");
}

void write_heatmap(const std::string& path, const std::vector<float>& map, int height, int width) {
  require(map.size() == static_cast<std::size_t>(height) * width, "heatmap size mismatch");
  cv::Mat gray(height, width, CV_8UC1);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const float v = std::clamp(map[static_cast<std::size_t>(y) * width + x], 0.0f, 1.0f);
      gray.at<std::uint8_t>(y, x) = static_cast<std::uint8_t>(std::lround(v * 255.0f));
    }
  }
  if (!cv::imwrite(path, gray)) throw std::runtime_error("cannot write heatmap '" + path + "'");
}

Tensor to_tensor(std::span<const Image* const> images) {
  require(!images.empty(), "to_tensor: empty batch");
  const int h = images.front()->height;
  const int w = images.front()->width;
  constexpr float kMean[3] = {0.485f, 0.456f, 0.406f};
  constexpr float kStd[3] = {0.229f, 0.224f, 0.225f};
  Tensor t(static_cast<int>(images.size()), 3, h, w);
  for (std::size_t b = 0; b < images.size(); ++b) {
    const Image& img = *images[b];
    require(img.height == h && img.width == w, "to_tensor: images differ in size");
    for (int c = 0; c < 3; ++c) {
      auto plane = t.channel(static_cast<int>(b), c);
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          plane[static_cast<std::size_t>(y) * w + x] =
              (static_cast<float>(img.at(y, x, c)) / 255.0f - kMean[c]) / kStd[c];
        }
      }
    }
  }
  return t;
}

Tensor to_tensor(const std::vector<Image>& images) {
  std::vector<const Image*> ptrs;
  ptrs.reserve(images.size());
  for (const auto& i : images) ptrs.push_back(&i);
  return to_tensor(ptrs);
}

// ---------------------------------------------------------------------------
// DatasetSpec

int DatasetSpec::train_id_count() const {
  std::set<int> ids;
  for (const auto& r : train) ids.insert(r.label);
  return static_cast<int>(ids.size());
}

std::vector<std::string> DatasetSpec::cameras() const {
  std::set<std::string> cams;
  for (const auto* split : {&train, &query, &gallery}) {
    for (const auto& r : *split) cams.insert(r.camera);
  }
  return {cams.begin(), cams.end()};
}

std::vector<int> DatasetSpec::train_labels() const {
  std::vector<int> out;
  out.reserve(train.size());
  for (const auto& r : train) out.push_back(r.label);
  return out;
}

void DatasetSpec::validate() const {
  std::set<int> train_ids;
  for (const auto& r : train) train_ids.insert(r.identity);
  for (const auto* split : {&query, &gallery}) {
    for (const auto& r : *split) {
      require(train_ids.count(r.identity) == 0,
              "dataset '" + name + "': identity " + std::to_string(r.identity) +
                  " appears in both train and test splits");
    }
  }
}

std::optional<ParsedName> parse_reid_filename(const std::string& filename) {
  static const std::regex pattern(R"(^(-?\d+)_c(\d+)[^/]*\.(jpg|jpeg|png|bmp|ppm)$)",
                                  std::regex::icase);
  std::smatch m;
  if (!std::regex_match(filename, m, pattern)) return std::nullopt;
  return ParsedName{std::stoi(m[1].str()), std::stoi(m[2].str())};
}

namespace {

// Contiguous 1-based labels in order of first appearance after sorting by id.
void remap_labels(std::vector<ImageRecord>& records) {
  std::set<int> ids;
  for (const auto& r : records) ids.insert(r.identity);
  std::map<int, int> label;
  int next = 1;
  for (int id : ids) label[id] = next++;
  for (auto& r : records) r.label = label[r.identity];
}

std::string camera_name(const std::string& dataset, int camera) {
  return dataset + ":c" + std::to_string(camera);
}

}  // namespace

DatasetSpec load_reid_directory(const std::string& root) {
  const fs::path base(root);
  DatasetSpec spec;
  spec.name = base.filename().empty() ? base.parent_path().filename().string()
                                      : base.filename().string();
  const std::pair<const char*, std::vector<ImageRecord>*> splits[] = {
      {"train", &spec.train}, {"query", &spec.query}, {"gallery", &spec.gallery}};
  for (const auto& [dir, records] : splits) {
    const fs::path p = base / dir;
    if (!fs::is_directory(p)) {
      if (std::string(dir) == "train") continue;
      throw std::runtime_error("dataset '" + root + "' lacks the '" + dir + "' directory");
    }
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(p)) {
      if (e.is_regular_file()) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      const auto name = f.filename().string();
      const auto parsed = parse_reid_filename(name);
      if (!parsed) {
        spec.warnings.push_back("skipped malformed filename '" + name + "'");
        continue;
      }
      if (parsed->identity < 0) {
        spec.warnings.push_back("skipped junk identity in '" + name + "'");
        continue;
      }
      ImageRecord r;
      r.path = f.string();
      r.identity = parsed->identity;
      r.camera = camera_name(spec.name, parsed->camera);
      records->push_back(std::move(r));
    }
    remap_labels(*records);
  }
  if (spec.train.empty() && spec.query.empty() && spec.gallery.empty()) {
    throw std::runtime_error("dataset '" + root + "' has no parseable images");
  }
  spec.validate();
  return spec;
}

DatasetSpec load_manifest(const std::string& csv_path, const std::string& name) {
  std::ifstream f(csv_path);
  if (!f) throw std::runtime_error("cannot open manifest '" + csv_path + "'");
  DatasetSpec spec;
  spec.name = name;
  const fs::path base = fs::path(csv_path).parent_path();
  std::string line;
  int line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cols;
    std::istringstream is(line);
    std::string item;
    while (std::getline(is, item, ',')) cols.push_back(item);
    if (cols.size() != 4) {
      spec.warnings.push_back("manifest line " + std::to_string(line_no) + " malformed");
      continue;
    }
    if (cols[0] == "split") continue;  // header
    ImageRecord r;
    r.path = (base / cols[1]).string();
    try {
      r.identity = std::stoi(cols[2]);
      r.camera = camera_name(name, std::stoi(cols[3]));
    } catch (const std::exception&) {
      spec.warnings.push_back("manifest line " + std::to_string(line_no) + " malformed");
      continue;
    }
    if (cols[0] == "train") {
      spec.train.push_back(std::move(r));
    } else if (cols[0] == "query") {
      spec.query.push_back(std::move(r));
    } else if (cols[0] == "gallery") {
      spec.gallery.push_back(std::move(r));
    } else {
      spec.warnings.push_back("manifest line " + std::to_string(line_no) + ": unknown split");
    }
  }
  for (auto* split : {&spec.train, &spec.query, &spec.gallery}) remap_labels(*split);
  if (spec.train.empty() && spec.query.empty() && spec.gallery.empty()) {
    throw std::runtime_error("manifest '" + csv_path + "' lists no images");
  }
  spec.validate();
  return spec;
}

void load_pixels(DatasetSpec& spec, int height, int width) {
  for (auto* split : {&spec.train, &spec.query, &spec.gallery}) {
    for (auto& r : *split) {
      if (r.image.height == height && r.image.width == width) continue;
      r.image = read_image(r.path, height, width);
    }
  }
}

void write_dataset(const DatasetSpec& spec, const std::string& root) {
  const fs::path base = fs::path(root) / spec.name;
  std::ofstream manifest;
  fs::create_directories(base);
  manifest.open(base / "manifest.csv");
  manifest << "split,path,identity,camera\n";
  const std::pair<const char*, const std::vector<ImageRecord>*> splits[] = {
      {"train", &spec.train}, {"query", &spec.query}, {"gallery", &spec.gallery}};
  for (const auto& [dir, records] : splits) {
    fs::create_directories(base / dir);
    int counter = 0;
    for (const auto& r : *records) {
      const auto colon = r.camera.rfind(":c");
      const int cam = colon == std::string::npos ? 0 : std::stoi(r.camera.substr(colon + 2));
      char fname[64];
      std::snprintf(fname, sizeof(fname), "%04d_c%d_%06d.png", r.identity, cam, counter++);
      write_image((base / dir / fname).string(), r.image);
      manifest << dir << "," << dir << "/" << fname << "," << r.identity << "," << cam << "\n";
    }
  }
  if (!manifest) throw std::runtime_error("failed writing manifest under '" + base.string() + "'");
}

// ---------------------------------------------------------------------------
// Synthetic generator

namespace {

using Rgb = std::array<double, 3>;

constexpr Rgb kPalette[] = {
    {0.85, 0.15, 0.15}, {0.15, 0.65, 0.20}, {0.15, 0.25, 0.85}, {0.90, 0.85, 0.20},
    {0.92, 0.92, 0.92}, {0.10, 0.10, 0.10}, {0.50, 0.50, 0.50}, {0.55, 0.35, 0.15},
    {0.60, 0.20, 0.70}, {0.95, 0.55, 0.10}};
constexpr Rgb kSkin[] = {{0.95, 0.80, 0.65}, {0.75, 0.55, 0.40}, {0.45, 0.30, 0.20}};
constexpr int kPaletteSize = static_cast<int>(std::size(kPalette));

struct Appearance {
  Rgb upper, lower, pattern_color, skin, bag_color;
  int pattern = 0;  // 0 none, 1 h-stripes, 2 v-stripes, 3 chest logo, 4 diagonal
  int period = 2;
  bool bag = false;
  bool bag_left = false;
};

struct PhotometricTransform {
  std::array<std::array<double, 3>, 3> matrix{};  // gain * hue rotation
  Rgb offset{};

  Rgb apply(const Rgb& c) const {
    Rgb out{};
    for (int i = 0; i < 3; ++i) {
      out[i] = offset[i];
      for (int j = 0; j < 3; ++j) out[i] += matrix[i][j] * c[j];
    }
    return out;
  }
};

Appearance random_appearance(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> pal(0, kPaletteSize - 1);
  std::uniform_int_distribution<int> skin(0, 2);
  std::uniform_int_distribution<int> pattern(0, 4);
  std::uniform_int_distribution<int> period(2, 4);
  std::bernoulli_distribution coin(0.5);
  Appearance a;
  a.upper = kPalette[pal(rng)];
  a.lower = kPalette[pal(rng)];
  a.pattern_color = kPalette[pal(rng)];
  a.skin = kSkin[skin(rng)];
  a.pattern = pattern(rng);
  a.period = period(rng);
  a.bag = coin(rng);
  a.bag_left = coin(rng);
  a.bag_color = kPalette[pal(rng)];
  return a;
}

PhotometricTransform random_transform(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> angle(-std::numbers::pi, std::numbers::pi);
  std::uniform_real_distribution<double> gain(0.55, 1.3);
  std::uniform_real_distribution<double> offset(-0.2, 0.2);
  const double th = angle(rng);
  // Rotation about the gray axis (1,1,1)/sqrt(3).
  const double c = std::cos(th);
  const double s = std::sin(th);
  const double k = (1.0 - c) / 3.0;
  const double q = s / std::sqrt(3.0);
  const double rot[3][3] = {{c + k, k - q, k + q}, {k + q, c + k, k - q}, {k - q, k + q, c + k}};
  PhotometricTransform t;
  for (int i = 0; i < 3; ++i) {
    const double g = gain(rng);
    for (int j = 0; j < 3; ++j) t.matrix[i][j] = g * rot[i][j];
    t.offset[i] = offset(rng);
  }
  return t;
}

PhotometricTransform camera_jitter(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> gain(0.92, 1.08);
  std::uniform_real_distribution<double> offset(-0.03, 0.03);
  PhotometricTransform t;
  for (int i = 0; i < 3; ++i) {
    t.matrix[i][i] = gain(rng);
    t.offset[i] = offset(rng);
  }
  return t;
}

// Renders one view of an identity in linear [0,1] RGB.
std::vector<Rgb> render_person(const Appearance& a, int h, int w, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 0.04);
  std::uniform_int_distribution<int> shift(-1, 1);
  const Rgb bg{0.25 + 0.5 * u01(rng), 0.25 + 0.5 * u01(rng), 0.25 + 0.5 * u01(rng)};
  const int dx = shift(rng) * std::max(1, w / 16);
  const int dy = shift(rng) * std::max(1, h / 32);
  const bool mirror = u01(rng) < 0.5;
  const double light = 0.85 + 0.3 * u01(rng);

  std::vector<Rgb> img(static_cast<std::size_t>(h) * w);
  auto frac_y = [h](double f) { return static_cast<int>(std::lround(f * h)); };
  auto frac_x = [w](double f) { return static_cast<int>(std::lround(f * w)); };
  const int head0 = frac_y(0.04), head1 = frac_y(0.19);
  const int torso0 = head1, torso1 = frac_y(0.56);
  const int legs1 = frac_y(0.97);
  const int body0 = frac_x(0.22), body1 = frac_x(0.78);
  const int headx0 = frac_x(0.38), headx1 = frac_x(0.62);
  const int leg_gap0 = frac_x(0.47), leg_gap1 = frac_x(0.53);

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int py = y - dy;
      int px = x - dx;
      if (mirror) px = w - 1 - px;
      Rgb c = bg;
      const bool in_body_x = px >= body0 && px < body1;
      if (py >= head0 && py < head1 && px >= headx0 && px < headx1) {
        c = a.skin;
      } else if (py >= torso0 && py < torso1 && in_body_x) {
        c = a.upper;
        const int ly = py - torso0;
        const int lx = px - body0;
        bool mark = false;
        switch (a.pattern) {
          case 1: mark = (ly / a.period) % 2 == 1; break;
          case 2: mark = (lx / a.period) % 2 == 1; break;
          case 3: {
            const int cy = (torso1 - torso0) / 2;
            const int cx = (body1 - body0) / 2;
            mark = std::abs(ly - cy) <= a.period - 1 && std::abs(lx - cx) <= a.period - 1;
            break;
          }
          case 4: mark = ((lx + ly) / a.period) % 2 == 1; break;
          default: break;
        }
        if (mark) c = a.pattern_color;
        if (a.bag) {
          const bool bag_x = a.bag_left ? px < body0 + (body1 - body0) / 4
                                        : px >= body1 - (body1 - body0) / 4;
          if (bag_x && py >= (torso0 + torso1) / 2) c = a.bag_color;
        }
      } else if (py >= torso1 && py < legs1 && in_body_x && !(px >= leg_gap0 && px < leg_gap1)) {
        c = a.lower;
      }
      for (int ch = 0; ch < 3; ++ch) c[ch] = c[ch] * light + noise(rng);
      img[static_cast<std::size_t>(y) * w + x] = c;
    }
  }
  return img;
}

Image quantize(const std::vector<Rgb>& linear, int h, int w, const PhotometricTransform& domain,
               const PhotometricTransform& camera) {
  Image img(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const Rgb c = domain.apply(camera.apply(linear[static_cast<std::size_t>(y) * w + x]));
      for (int ch = 0; ch < 3; ++ch) {
        img.at(y, x, ch) =
            static_cast<std::uint8_t>(std::lround(std::clamp(c[ch], 0.0, 1.0) * 255.0));
      }
    }
  }
  return img;
}

DatasetSpec render_domain(const SynthConfig& cfg, int d, const PhotometricTransform& domain) {
  std::mt19937_64 rng(cfg.seed * 1000003ULL + 7919ULL * static_cast<std::uint64_t>(d + 1));
  DatasetSpec spec;
  spec.name = std::string("synth") + static_cast<char>('A' + d % 26) +
              (d >= 26 ? std::to_string(d / 26) : std::string());
  std::vector<PhotometricTransform> cams;
  for (int c = 0; c < cfg.cameras_per_domain; ++c) cams.push_back(camera_jitter(rng));
  const int n_train = cfg.ids_per_domain / 2;
  for (int id = 0; id < cfg.ids_per_domain; ++id) {
    const Appearance a = random_appearance(rng);
    const bool is_train = id < n_train;
    const int identity = id + 1;
    std::set<int> seen_cam;
    for (int j = 0; j < cfg.images_per_id; ++j) {
      const int cam = j % cfg.cameras_per_domain;
      ImageRecord r;
      r.identity = identity;
      r.camera = camera_name(spec.name, cam + 1);
      r.image = quantize(render_person(a, cfg.height, cfg.width, rng), cfg.height, cfg.width,
                         domain, cams[cam]);
      if (is_train) {
        spec.train.push_back(std::move(r));
      } else if (seen_cam.insert(cam).second) {
        spec.query.push_back(std::move(r));
      } else {
        spec.gallery.push_back(std::move(r));
      }
    }
  }
  for (auto* split : {&spec.train, &spec.query, &spec.gallery}) remap_labels(*split);
  return spec;
}

double linf(const std::array<double, 3>& a, const std::array<double, 3>& b) {
  double m = 0.0;
  for (int i = 0; i < 3; ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

std::array<double, 3> channel_means(const DatasetSpec& spec) {
  std::array<double, 3> sum{};
  std::size_t count = 0;
  for (const auto* split : {&spec.train, &spec.query, &spec.gallery}) {
    for (const auto& r : *split) {
      for (std::size_t i = 0; i < r.image.pixels.size(); ++i) sum[i % 3] += r.image.pixels[i];
      count += r.image.pixels.size() / 3;
    }
  }
  for (auto& s : sum) s = count == 0 ? 0.0 : s / (255.0 * static_cast<double>(count));
  return sum;
}

std::vector<DatasetSpec> synth_generate(const SynthConfig& cfg) {
  require(cfg.domains >= 1 && cfg.ids_per_domain >= 1 && cfg.images_per_id >= 1 &&
              cfg.cameras_per_domain >= 1,
          "synthetic generator counts must be >= 1");
  std::mt19937_64 rng(cfg.seed);
  std::vector<DatasetSpec> out;
  std::vector<std::array<double, 3>> means;
  constexpr int kMaxAttempts = 200;
  for (int d = 0; d < cfg.domains; ++d) {
    DatasetSpec spec;
    std::array<double, 3> m{};
    for (int attempt = 0;; ++attempt) {
      spec = render_domain(cfg, d, random_transform(rng));
      m = channel_means(spec);
      const bool ok = std::all_of(means.begin(), means.end(), [&](const auto& other) {
        return linf(m, other) >= cfg.domain_margin;
      });
      if (ok) break;
      if (attempt + 1 >= kMaxAttempts) {
        throw std::runtime_error("synthetic generator could not separate domain " +
                                 std::to_string(d) + " by the configured margin");
      }
    }
    means.push_back(m);
    out.push_back(std::move(spec));
  }
  return out;
}

SequenceOrder sequence_config(const std::string& order) {
  SequenceOrder seq;
  seq.name = order;
  std::vector<std::string> names;
  if (order == "order1") {
    names = {"market1501", "dukemtmc", "cuhksysu", "msmt17"};
  } else if (order == "order2") {
    names = {"viper", "market1501", "cuhksysu", "msmt17"};
  } else {
    std::istringstream is(order);
    std::string item;
    while (std::getline(is, item, ',')) {
      if (!item.empty()) names.push_back(item);
    }
  }
  if (names.empty()) throw std::invalid_argument("unknown or empty sequence order '" + order + "'");
  std::set<std::string> unique(names.begin(), names.end());
  require(unique.size() == names.size(), "sequence order '" + order + "' repeats a dataset");
  for (std::size_t i = 0; i < names.size(); ++i) {
    seq.steps.push_back({names[i], i == 0 ? 30 : 10});
  }
  return seq;
}

}  // namespace lreid
