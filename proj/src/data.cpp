#include "seea/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>

#include <json.hpp>

#include "seea/image.hpp"
#include "seea/rng.hpp"

namespace fs = std::filesystem;

namespace seea {

std::string DatasetManifest::to_json() const {
  nlohmann::ordered_json j;
  j["root"] = root;
  j["seed"] = seed;
  auto& ent = j["entries"] = nlohmann::ordered_json::array();
  for (const auto& e : entries) {
    ent.push_back({{"id", e.id}, {"image", e.image_path}, {"mask", e.mask_path}});
  }
  j["split"] = {{"train", train_ids}, {"val", val_ids}};
  return j.dump(2);
}

namespace {

bool supported_ext(std::string ext) {
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

std::map<std::string, std::string> scan_dir(const fs::path& dir) {
  std::map<std::string, std::string> stems;
  if (!fs::is_directory(dir)) {
    throw IoError("dataset directory missing: " + dir.string());
  }
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const fs::path p = entry.path();
    if (!supported_ext(p.extension().string())) continue;
    stems[p.stem().string()] = p.string();
  }
  return stems;
}

}  // namespace

LoadedDataset load_dataset(const std::string& root, int target_h, int target_w,
                           double split_fraction, uint64_t seed) {
  if (split_fraction <= 0.0 || split_fraction >= 1.0) {
    throw ConfigError({"split_fraction must be in (0,1), got " + std::to_string(split_fraction)});
  }
  const auto images = scan_dir(fs::path(root) / "images");
  const auto masks = scan_dir(fs::path(root) / "masks");

  std::vector<std::string> problems;
  for (const auto& [stem, path] : images) {
    if (!masks.count(stem)) problems.push_back("image without mask: " + path);
  }
  for (const auto& [stem, path] : masks) {
    if (!images.count(stem)) problems.push_back("mask without image: " + path);
  }
  if (!problems.empty()) {
    std::string msg = "unpaired dataset files:";
    for (const auto& p : problems) msg += "\n  - " + p;
    throw IoError(msg);
  }
  if (images.empty()) {
    throw IoError("empty dataset: no image/mask pairs under " + root);
  }

  LoadedDataset out;
  out.manifest.root = root;
  out.manifest.seed = seed;
  for (const auto& [stem, path] : images) {  // std::map iterates sorted by id
    out.manifest.entries.push_back({stem, path, masks.at(stem)});
  }

  std::vector<size_t> order(out.manifest.entries.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(derive_seed(seed, SeedStream::kShuffle));
  rng.shuffle(order.begin(), order.end());
  const size_t n_train =
      static_cast<size_t>(std::floor(static_cast<double>(order.size()) * split_fraction));

  for (size_t i = 0; i < order.size(); ++i) {
    const ManifestEntry& e = out.manifest.entries[order[i]];
    SegmentationSample s;
    s.id = e.id;
    s.image = resize_bilinear(load_image_rgb(e.image_path), target_h, target_w);
    Tensor<float> m = resize_nearest(load_mask(e.mask_path), target_h, target_w);
    binarize(m);
    s.mask = std::move(m);
    if (i < n_train) {
      out.manifest.train_ids.push_back(e.id);
      out.train.push_back(std::move(s));
    } else {
      out.manifest.val_ids.push_back(e.id);
      out.val.push_back(std::move(s));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// synthetic data
// ---------------------------------------------------------------------------

bool Ellipse::contains(double x, double y) const {
  const double dx = x - cx, dy = y - cy;
  const double u = (dx * std::cos(theta) + dy * std::sin(theta)) / a;
  const double v = (-dx * std::sin(theta) + dy * std::cos(theta)) / b;
  return u * u + v * v <= 1.0;
}

std::vector<Ellipse> synth_ellipses(uint64_t seed, uint64_t index, int h, int w) {
  Rng rng(derive_seed(seed, SeedStream::kSynth, 2 * index));
  std::vector<Ellipse> out;
  if (rng.uniform() < 0.25) return out;  // empty-mask sample
  const int count = 1 + static_cast<int>(rng.bounded(3));
  const double scale = std::min(h, w);
  for (int k = 0; k < count; ++k) {
    Ellipse e;
    e.cx = rng.uniform(0.2, 0.8) * w;
    e.cy = rng.uniform(0.2, 0.8) * h;
    e.a = rng.uniform(0.08, 0.22) * scale;
    e.b = rng.uniform(0.08, 0.22) * scale;
    e.theta = rng.uniform(0.0, M_PI);
    out.push_back(e);
  }
  return out;
}

std::vector<SegmentationSample> synth_dataset(int n, int h, int w, uint64_t seed) {
  std::vector<SegmentationSample> out;
  out.reserve(static_cast<size_t>(std::max(0, n)));
  for (int i = 0; i < n; ++i) {
    const auto ellipses = synth_ellipses(seed, static_cast<uint64_t>(i), h, w);
    Rng noise(derive_seed(seed, SeedStream::kSynth, 2 * static_cast<uint64_t>(i) + 1));

    SegmentationSample s;
    s.id = "synth_" + std::to_string(i);
    s.mask = Tensor<float>({1, h, w});
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        bool inside = false;
        for (const auto& e : ellipses) {
          if (e.contains(x, y)) {
            inside = true;
            break;
          }
        }
        s.mask[static_cast<size_t>(y) * w + x] = inside ? 1.0f : 0.0f;
      }
    }

    const double tint[3] = {noise.uniform(-0.05, 0.05), noise.uniform(-0.05, 0.05),
                            noise.uniform(-0.05, 0.05)};
    s.image = Tensor<float>({3, h, w});
    const size_t plane = static_cast<size_t>(h) * w;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const size_t i2 = static_cast<size_t>(y) * w + x;
        const bool inside = s.mask[i2] > 0.5f;
        for (int c = 0; c < 3; ++c) {
          const double base = inside ? 0.75 + tint[c] : 0.15;
          const double v = base + noise.normal() * 0.05;
          s.image[c * plane + i2] = static_cast<float>(std::clamp(v, 0.0, 1.0));
        }
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

void write_synth_dataset(const std::string& root, int n, int h, int w, uint64_t seed) {
  fs::create_directories(fs::path(root) / "images");
  fs::create_directories(fs::path(root) / "masks");
  for (const auto& s : synth_dataset(n, h, w, seed)) {
    save_image((fs::path(root) / "images" / (s.id + ".png")).string(), s.image);
    save_image((fs::path(root) / "masks" / (s.id + ".png")).string(), s.mask);
  }
}

// ---------------------------------------------------------------------------
// batching
// ---------------------------------------------------------------------------

namespace {
Batch stack(const std::vector<SegmentationSample>& samples, const std::vector<size_t>& idx,
            size_t begin, size_t end) {
  const int n = static_cast<int>(end - begin);
  const auto& first = samples[idx[begin]];
  const int h = first.image.dim(1), w = first.image.dim(2);
  Batch b{Tensor<float>({n, 3, h, w}), Tensor<float>({n, 1, h, w})};
  const size_t img_sz = first.image.size();
  const size_t msk_sz = first.mask.size();
  for (size_t i = begin; i < end; ++i) {
    const auto& s = samples[idx[i]];
    if (s.image.size() != img_sz || s.mask.size() != msk_sz) {
      throw ShapeError("make_batches: inconsistent sample shapes in dataset");
    }
    std::copy(s.image.vec().begin(), s.image.vec().end(),
              b.images.data() + (i - begin) * img_sz);
    std::copy(s.mask.vec().begin(), s.mask.vec().end(), b.masks.data() + (i - begin) * msk_sz);
  }
  return b;
}
}  // namespace

std::vector<Batch> make_batches(const std::vector<SegmentationSample>& samples, int batch_size,
                                uint64_t shuffle_seed, int epoch) {
  if (batch_size < 1) throw ConfigError({"batch_size must be >= 1"});
  std::vector<size_t> idx(samples.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  Rng rng(derive_seed(shuffle_seed, SeedStream::kShuffle, static_cast<uint64_t>(epoch)));
  rng.shuffle(idx.begin(), idx.end());

  std::vector<Batch> out;
  for (size_t at = 0; at < idx.size(); at += static_cast<size_t>(batch_size)) {
    const size_t end = std::min(idx.size(), at + static_cast<size_t>(batch_size));
    out.push_back(stack(samples, idx, at, end));
  }
  return out;
}

std::vector<Batch> make_eval_batches(const std::vector<SegmentationSample>& samples,
                                     int batch_size) {
  if (batch_size < 1) throw ConfigError({"batch_size must be >= 1"});
  std::vector<size_t> idx(samples.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::vector<Batch> out;
  for (size_t at = 0; at < idx.size(); at += static_cast<size_t>(batch_size)) {
    const size_t end = std::min(idx.size(), at + static_cast<size_t>(batch_size));
    out.push_back(stack(samples, idx, at, end));
  }
  return out;
}

}  // namespace seea
