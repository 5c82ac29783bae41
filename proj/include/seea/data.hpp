#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "seea/tensor.hpp"

namespace seea {

struct SegmentationSample {
  Tensor<float> image;  // [3,H,W], values in [0,1]
  Tensor<float> mask;   // [1,H,W], values in {0,1}
  std::string id;
};

struct ManifestEntry {
  std::string id;
  std::string image_path;
  std::string mask_path;
};

struct DatasetManifest {
  std::string root;
  std::vector<ManifestEntry> entries;  // sorted by id
  std::vector<std::string> train_ids;
  std::vector<std::string> val_ids;
  uint64_t seed = 0;

  std::string to_json() const;
};

struct LoadedDataset {
  DatasetManifest manifest;
  std::vector<SegmentationSample> train;
  std::vector<SegmentationSample> val;
};

/// Loads `<root>/images/<stem>.{png|jpg|jpeg}` paired with
/// `<root>/masks/<stem>.*` by filename stem. Images are resized bilinearly,
/// masks with nearest-neighbour and binarized at 127/255. The split shuffles
/// ids deterministically (ids sorted first, so enumeration order is
/// irrelevant) and puts floor(n * split_fraction) samples in train.
LoadedDataset load_dataset(const std::string& root, int target_h, int target_w,
                           double split_fraction, uint64_t seed);

// -- synthetic corpus ---------------------------------------------------------

struct Ellipse {
  double cx, cy;     // centre, pixels
  double a, b;       // semi-axes, pixels
  double theta;      // rotation, radians
  bool contains(double x, double y) const;
};

/// Geometry of synthetic sample `index`; independent of the total count so a
/// sample's content never changes when the dataset grows.
std::vector<Ellipse> synth_ellipses(uint64_t seed, uint64_t index, int h, int w);

/// Noisy dark background with 0-3 bright ellipses; the mask is the exact set
/// of pixels whose centres satisfy an ellipse inequality. About a quarter of
/// the samples have empty masks.
std::vector<SegmentationSample> synth_dataset(int n, int h, int w, uint64_t seed);

/// Writes a synthetic dataset in the directory-contract layout
/// (`<root>/images`, `<root>/masks`).
void write_synth_dataset(const std::string& root, int n, int h, int w, uint64_t seed);

// -- batching -----------------------------------------------------------------

struct Batch {
  Tensor<float> images;  // [N,3,H,W]
  Tensor<float> masks;   // [N,1,H,W]
};

/// Deterministic per-epoch shuffle; the final partial batch is emitted.
std::vector<Batch> make_batches(const std::vector<SegmentationSample>& samples, int batch_size,
                                uint64_t shuffle_seed, int epoch);

/// Stacks samples in the given order without shuffling (evaluation).
std::vector<Batch> make_eval_batches(const std::vector<SegmentationSample>& samples,
                                     int batch_size);

}  // namespace seea
