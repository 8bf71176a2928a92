#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "prunekit/errors.hpp"
#include "prunekit/tensor.hpp"

namespace prunekit {

// Labeled image set held in memory. `raw` keeps the stored uint8 pixels;
// `images` holds the normalized float values actually fed to networks:
// (pixel/255 - mean_c) / std_c with per-channel statistics taken from the
// training split when the dataset pair was created.
struct Dataset {
  std::string name;
  std::string split;
  int class_count = 0;
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> raw;       // n * c * h * w
  std::vector<float> images;           // normalized, same layout
  std::vector<std::int32_t> labels;    // n
  std::vector<std::uint64_t> sample_ids;  // n, unique within a dataset family
  std::vector<std::string> class_names;
  std::vector<float> norm_mean;  // per channel, 0..1 pixel scale
  std::vector<float> norm_std;
  std::string parent;                 // empty for a root dataset
  std::vector<int> class_mapping;     // subset: original id per new label

  std::size_t size() const { return labels.size(); }
  std::size_t image_elems() const { return channels * height * width; }
};

// Synthetic oriented-texture classification set. Class k draws a sinusoidal
// grating at orientation k*pi/classes with a randomized frequency mode,
// phase, contrast, offset and additive Gaussian noise, so the classes are
// learnable by a small CNN yet far from trivial.
struct SynthSpec {
  std::uint64_t seed = 1;
  int class_count = 10;
  std::size_t train_n = 2000;
  std::size_t eval_n = 500;
  std::size_t channels = 1;
  std::size_t height = 16;
  std::size_t width = 16;
  double noise = 0.35;
};

struct DatasetPair {
  Dataset train;
  Dataset eval;
};

DatasetPair generate_synthetic(const SynthSpec& spec, const std::string& name);

// Container IO. `expected_name` may be empty to accept any dataset.
void save_dataset_file(const std::string& path, const Dataset& data);
Dataset load_dataset(const std::string& expected_name, const std::string& path);
inline Dataset load_dataset(const std::string& path) { return load_dataset("", path); }

// Class-subset benchmark construction: keep only the listed classes and
// relabel them contiguously (ascending original id). Sample ids and
// normalization carry over from the parent, so subset tensors are bitwise
// subsets of parent tensors.
struct ClassSubsetSpec {
  std::string parent_name;
  std::vector<int> classes;
  std::string derived_name;  // optional; defaulted from parent + classes
};

Dataset build_class_subset(const Dataset& parent, const ClassSubsetSpec& spec);

// Row subset in index order (used for data sharding and sampled fine-tuning).
Dataset dataset_slice(const Dataset& data, const std::vector<std::size_t>& indices);

// Importers for the two common small-image binary archives. Normalization
// is computed from the train files and applied to both splits.
DatasetPair import_idx(const std::string& train_images_path, const std::string& train_labels_path,
                       const std::string& eval_images_path, const std::string& eval_labels_path,
                       const std::string& name);
DatasetPair import_cifar10(const std::vector<std::string>& train_bins,
                           const std::vector<std::string>& eval_bins, const std::string& name);

// Batch extraction as network input.
template <typename T>
Tensor<T> batch_images(const Dataset& data, const std::vector<std::size_t>& indices) {
  Tensor<T> t({indices.size(), data.channels, data.height, data.width});
  const std::size_t stride = data.image_elems();
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= data.size()) fail(ErrorCategory::data, "batch index out of range");
    const float* src = data.images.data() + indices[i] * stride;
    T* dst = t.data.data() + i * stride;
    for (std::size_t k = 0; k < stride; ++k) dst[k] = static_cast<T>(src[k]);
  }
  return t;
}

inline std::vector<std::int32_t> batch_labels(const Dataset& data,
                                              const std::vector<std::size_t>& indices) {
  std::vector<std::int32_t> out(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) out[i] = data.labels[indices[i]];
  return out;
}

}  // namespace prunekit
