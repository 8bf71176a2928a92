#include "prunekit/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <memory>
#include <set>

#include "json.hpp"
#include "prunekit/container.hpp"
#include "prunekit/rng.hpp"

namespace prunekit {

namespace {

constexpr char kSectionDatasetMeta[] = "META";
constexpr char kSectionImages[] = "IMAGES";
constexpr char kSectionLabels[] = "LABELS";
constexpr char kSectionIds[] = "IDS";

void compute_norm_stats(const Dataset& train, std::vector<float>& mean, std::vector<float>& stddev) {
  const std::size_t c = train.channels, plane = train.height * train.width;
  std::vector<double> sum(c, 0.0), sumsq(c, 0.0);
  for (std::size_t i = 0; i < train.size(); ++i) {
    const std::uint8_t* img = train.raw.data() + i * train.image_elems();
    for (std::size_t ch = 0; ch < c; ++ch) {
      for (std::size_t p = 0; p < plane; ++p) {
        const double v = static_cast<double>(img[ch * plane + p]) / 255.0;
        sum[ch] += v;
        sumsq[ch] += v * v;
      }
    }
  }
  const double n = static_cast<double>(train.size() * plane);
  mean.resize(c);
  stddev.resize(c);
  for (std::size_t ch = 0; ch < c; ++ch) {
    const double m = sum[ch] / n;
    const double var = std::max(0.0, sumsq[ch] / n - m * m);
    mean[ch] = static_cast<float>(m);
    stddev[ch] = static_cast<float>(std::max(std::sqrt(var), 1e-6));
  }
}

void apply_normalization(Dataset& data) {
  const std::size_t c = data.channels, plane = data.height * data.width;
  data.images.resize(data.raw.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const std::uint8_t* src = data.raw.data() + i * data.image_elems();
    float* dst = data.images.data() + i * data.image_elems();
    for (std::size_t ch = 0; ch < c; ++ch) {
      const float m = data.norm_mean[ch], s = data.norm_std[ch];
      for (std::size_t p = 0; p < plane; ++p) {
        dst[ch * plane + p] = (static_cast<float>(src[ch * plane + p]) / 255.0f - m) / s;
      }
    }
  }
}

void check_dataset(const Dataset& d) {
  if (d.labels.size() != d.sample_ids.size() ||
      d.raw.size() != d.labels.size() * d.image_elems()) {
    fail(ErrorCategory::data, "dataset field sizes are inconsistent");
  }
  for (std::int32_t l : d.labels) {
    if (l < 0 || l >= d.class_count) {
      fail(ErrorCategory::data, "label " + std::to_string(l) + " outside class_count " +
                                    std::to_string(d.class_count));
    }
  }
  if (d.norm_mean.size() != d.channels || d.norm_std.size() != d.channels) {
    fail(ErrorCategory::data, "normalization stats missing a channel");
  }
}

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::unique_ptr<std::FILE, int (*)(std::FILE*)> f(std::fopen(path.c_str(), "rb"), &std::fclose);
  if (!f) fail(ErrorCategory::io, "cannot open '" + path + "'");
  std::fseek(f.get(), 0, SEEK_END);
  const long size = std::ftell(f.get());
  std::fseek(f.get(), 0, SEEK_SET);
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(std::max(0L, size)));
  if (!bytes.empty() && std::fread(bytes.data(), 1, bytes.size(), f.get()) != bytes.size()) {
    fail(ErrorCategory::io, "short read from '" + path + "'");
  }
  return bytes;
}

std::uint32_t read_be32(const std::uint8_t* p) {
  return (static_cast<std::uint32_t>(p[0]) << 24) | (static_cast<std::uint32_t>(p[1]) << 16) |
         (static_cast<std::uint32_t>(p[2]) << 8) | static_cast<std::uint32_t>(p[3]);
}

}  // namespace

void save_dataset_file(const std::string& path, const Dataset& data) {
  check_dataset(data);
  nlohmann::json meta;
  meta["format"] = "dataset";
  meta["name"] = data.name;
  meta["split"] = data.split;
  meta["class_count"] = data.class_count;
  meta["channels"] = data.channels;
  meta["height"] = data.height;
  meta["width"] = data.width;
  meta["class_names"] = data.class_names;
  meta["norm_mean"] = data.norm_mean;
  meta["norm_std"] = data.norm_std;
  if (!data.parent.empty()) meta["parent"] = data.parent;
  if (!data.class_mapping.empty()) meta["class_mapping"] = data.class_mapping;
  const std::string meta_str = meta.dump();

  Section meta_section{kSectionDatasetMeta,
                       std::vector<std::uint8_t>(meta_str.begin(), meta_str.end())};
  Section images{kSectionImages, {}};
  {
    ByteWriter w;
    w.u64(data.size());
    w.raw(data.raw);
    images.payload = w.take();
  }
  Section labels{kSectionLabels, {}};
  {
    ByteWriter w;
    w.u64(data.labels.size());
    for (std::int32_t l : data.labels) w.i32(l);
    labels.payload = w.take();
  }
  Section ids{kSectionIds, {}};
  {
    ByteWriter w;
    w.u64(data.sample_ids.size());
    for (std::uint64_t id : data.sample_ids) w.u64(id);
    ids.payload = w.take();
  }
  save_container_file(path, {meta_section, images, labels, ids});
}

Dataset load_dataset(const std::string& expected_name, const std::string& path) {
  std::vector<Section> sections = load_container_file(path);
  const Section& meta_section = find_section(sections, kSectionDatasetMeta);
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(meta_section.payload.begin(), meta_section.payload.end());
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCategory::format, std::string("bad dataset META: ") + e.what());
  }
  if (meta.value("format", "") != "dataset") {
    fail(ErrorCategory::format, "'" + path + "' is not a dataset container (format='" +
                                    meta.value("format", "") + "')");
  }
  Dataset d;
  d.name = meta.value("name", "");
  if (!expected_name.empty() && d.name != expected_name) {
    fail(ErrorCategory::data,
         "dataset name '" + d.name + "' does not match expected '" + expected_name + "'");
  }
  d.split = meta.value("split", "");
  d.class_count = meta.at("class_count").get<int>();
  d.channels = meta.at("channels").get<std::size_t>();
  d.height = meta.at("height").get<std::size_t>();
  d.width = meta.at("width").get<std::size_t>();
  d.class_names = meta.value("class_names", std::vector<std::string>{});
  d.norm_mean = meta.at("norm_mean").get<std::vector<float>>();
  d.norm_std = meta.at("norm_std").get<std::vector<float>>();
  d.parent = meta.value("parent", "");
  d.class_mapping = meta.value("class_mapping", std::vector<int>{});

  {
    const Section& s = find_section(sections, kSectionImages);
    ByteReader r(s.payload);
    const std::uint64_t n = r.u64();
    const std::uint64_t want = n * d.image_elems();
    if (r.remaining() != want) {
      fail(ErrorCategory::format, "IMAGES section holds " + std::to_string(r.remaining()) +
                                      " bytes, expected " + std::to_string(want));
    }
    auto bytes = r.take(static_cast<std::size_t>(want));
    d.raw.assign(bytes.begin(), bytes.end());
  }
  {
    const Section& s = find_section(sections, kSectionLabels);
    ByteReader r(s.payload);
    const std::uint64_t n = r.u64();
    d.labels.resize(static_cast<std::size_t>(n));
    for (auto& l : d.labels) l = r.i32();
  }
  {
    const Section& s = find_section(sections, kSectionIds);
    ByteReader r(s.payload);
    const std::uint64_t n = r.u64();
    d.sample_ids.resize(static_cast<std::size_t>(n));
    for (auto& id : d.sample_ids) id = r.u64();
  }
  check_dataset(d);
  apply_normalization(d);
  return d;
}

namespace {

// Deterministic standard normal from two uniforms.
double gaussian(Rng& rng) {
  const double u1 = std::max(rng.next_double(), 1e-12);
  const double u2 = rng.next_double();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

void synth_fill(Dataset& d, const SynthSpec& spec, Rng& rng, std::uint64_t first_id) {
  const std::size_t n = d.labels.size();
  const std::size_t plane = d.height * d.width;
  d.raw.resize(n * d.image_elems());
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % static_cast<std::size_t>(spec.class_count));
    d.labels[i] = label;
    d.sample_ids[i] = first_id + i;
    const double theta = 3.14159265358979323846 * label / spec.class_count;
    const double freq = (rng.next_below(2) == 0 ? 2.5 : 4.0) / static_cast<double>(d.width);
    const double phase = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
    const double contrast = rng.uniform(0.5, 1.0);
    const double offset = rng.uniform(-0.15, 0.15);
    const double cx = std::cos(theta), sy = std::sin(theta);
    for (std::size_t ch = 0; ch < d.channels; ++ch) {
      // all channels share the grating; per-channel gain adds mild variety
      const double gain = d.channels == 1 ? 1.0 : rng.uniform(0.7, 1.0);
      std::uint8_t* img = d.raw.data() + i * d.image_elems() + ch * plane;
      for (std::size_t y = 0; y < d.height; ++y) {
        for (std::size_t x = 0; x < d.width; ++x) {
          const double t = 2.0 * 3.14159265358979323846 * freq *
                           (static_cast<double>(x) * cx + static_cast<double>(y) * sy);
          double v = offset + gain * contrast * std::sin(t + phase) + spec.noise * gaussian(rng);
          const double pixel = 127.5 + 100.0 * v;
          img[y * d.width + x] =
              static_cast<std::uint8_t>(std::clamp(pixel, 0.0, 255.0));
        }
      }
    }
  }
}

}  // namespace

DatasetPair generate_synthetic(const SynthSpec& spec, const std::string& name) {
  if (spec.class_count < 2) fail(ErrorCategory::config, "synthetic set needs at least 2 classes");
  if (spec.train_n == 0 || spec.eval_n == 0) {
    fail(ErrorCategory::config, "synthetic splits must be non-empty");
  }
  DatasetPair pair;
  for (auto* d : {&pair.train, &pair.eval}) {
    d->name = name;
    d->class_count = spec.class_count;
    d->channels = spec.channels;
    d->height = spec.height;
    d->width = spec.width;
    for (int c = 0; c < spec.class_count; ++c) {
      d->class_names.push_back("grating-" + std::to_string(c));
    }
  }
  pair.train.split = "train";
  pair.eval.split = "eval";
  pair.train.labels.resize(spec.train_n);
  pair.train.sample_ids.resize(spec.train_n);
  pair.eval.labels.resize(spec.eval_n);
  pair.eval.sample_ids.resize(spec.eval_n);

  Rng train_rng = Rng(spec.seed).fork(1);
  Rng eval_rng = Rng(spec.seed).fork(2);
  synth_fill(pair.train, spec, train_rng, 0);
  synth_fill(pair.eval, spec, eval_rng, spec.train_n);

  compute_norm_stats(pair.train, pair.train.norm_mean, pair.train.norm_std);
  pair.eval.norm_mean = pair.train.norm_mean;
  pair.eval.norm_std = pair.train.norm_std;
  apply_normalization(pair.train);
  apply_normalization(pair.eval);
  return pair;
}

Dataset build_class_subset(const Dataset& parent, const ClassSubsetSpec& spec) {
  if (spec.classes.empty()) fail(ErrorCategory::config, "subset class list is empty");
  std::set<int> wanted;
  for (int c : spec.classes) {
    if (c < 0 || c >= parent.class_count) {
      fail(ErrorCategory::config, "subset class " + std::to_string(c) + " out of range");
    }
    if (!wanted.insert(c).second) {
      fail(ErrorCategory::config, "subset class " + std::to_string(c) + " listed twice");
    }
  }
  Dataset sub;
  sub.parent = parent.name;
  if (!spec.parent_name.empty() && spec.parent_name != parent.name) {
    fail(ErrorCategory::data, "subset spec expects parent '" + spec.parent_name +
                                  "' but dataset is '" + parent.name + "'");
  }
  sub.split = parent.split;
  sub.channels = parent.channels;
  sub.height = parent.height;
  sub.width = parent.width;
  sub.norm_mean = parent.norm_mean;
  sub.norm_std = parent.norm_std;
  sub.class_count = static_cast<int>(wanted.size());

  std::map<int, int> relabel;  // ascending original id -> new contiguous id
  for (int c : wanted) {
    const int new_id = static_cast<int>(relabel.size());
    relabel[c] = new_id;
    sub.class_mapping.push_back(c);
    sub.class_names.push_back(c < static_cast<int>(parent.class_names.size())
                                  ? parent.class_names[static_cast<std::size_t>(c)]
                                  : "class-" + std::to_string(c));
  }
  if (spec.derived_name.empty()) {
    std::string suffix;
    for (int c : sub.class_mapping) suffix += "-" + std::to_string(c);
    sub.name = parent.name + "-sub" + suffix;
  } else {
    sub.name = spec.derived_name;
  }

  const std::size_t stride = parent.image_elems();
  for (std::size_t i = 0; i < parent.size(); ++i) {
    auto it = relabel.find(parent.labels[i]);
    if (it == relabel.end()) continue;
    sub.labels.push_back(it->second);
    sub.sample_ids.push_back(parent.sample_ids[i]);
    sub.raw.insert(sub.raw.end(), parent.raw.begin() + static_cast<std::ptrdiff_t>(i * stride),
                   parent.raw.begin() + static_cast<std::ptrdiff_t>((i + 1) * stride));
  }
  if (sub.labels.empty()) fail(ErrorCategory::data, "subset matched no samples");
  apply_normalization(sub);
  return sub;
}

Dataset dataset_slice(const Dataset& data, const std::vector<std::size_t>& indices) {
  Dataset out;
  out.name = data.name;
  out.split = data.split;
  out.class_count = data.class_count;
  out.channels = data.channels;
  out.height = data.height;
  out.width = data.width;
  out.class_names = data.class_names;
  out.norm_mean = data.norm_mean;
  out.norm_std = data.norm_std;
  out.parent = data.parent;
  out.class_mapping = data.class_mapping;
  const std::size_t stride = data.image_elems();
  for (std::size_t i : indices) {
    if (i >= data.size()) fail(ErrorCategory::data, "slice index out of range");
    out.labels.push_back(data.labels[i]);
    out.sample_ids.push_back(data.sample_ids[i]);
    out.raw.insert(out.raw.end(), data.raw.begin() + static_cast<std::ptrdiff_t>(i * stride),
                   data.raw.begin() + static_cast<std::ptrdiff_t>((i + 1) * stride));
    out.images.insert(out.images.end(),
                      data.images.begin() + static_cast<std::ptrdiff_t>(i * stride),
                      data.images.begin() + static_cast<std::ptrdiff_t>((i + 1) * stride));
  }
  return out;
}

DatasetPair import_idx(const std::string& train_images_path, const std::string& train_labels_path,
                       const std::string& eval_images_path, const std::string& eval_labels_path,
                       const std::string& name) {
  auto load_split = [&](const std::string& images_path, const std::string& labels_path,
                        const std::string& split, std::uint64_t id_base) {
    const std::vector<std::uint8_t> img = read_file(images_path);
    const std::vector<std::uint8_t> lbl = read_file(labels_path);
    if (img.size() < 16 || read_be32(img.data()) != 0x00000803u) {
      fail(ErrorCategory::format, "'" + images_path + "' is not an IDX image file");
    }
    if (lbl.size() < 8 || read_be32(lbl.data()) != 0x00000801u) {
      fail(ErrorCategory::format, "'" + labels_path + "' is not an IDX label file");
    }
    const std::uint32_t n = read_be32(img.data() + 4);
    const std::uint32_t h = read_be32(img.data() + 8);
    const std::uint32_t w = read_be32(img.data() + 12);
    if (read_be32(lbl.data() + 4) != n) {
      fail(ErrorCategory::format, "IDX image/label counts differ");
    }
    if (img.size() != 16 + static_cast<std::size_t>(n) * h * w || lbl.size() != 8 + n) {
      fail(ErrorCategory::format, "IDX payload size mismatch");
    }
    Dataset d;
    d.name = name;
    d.split = split;
    d.channels = 1;
    d.height = h;
    d.width = w;
    d.raw.assign(img.begin() + 16, img.end());
    d.labels.resize(n);
    d.sample_ids.resize(n);
    int max_label = 0;
    for (std::uint32_t i = 0; i < n; ++i) {
      d.labels[i] = lbl[8 + i];
      d.sample_ids[i] = id_base + i;
      max_label = std::max(max_label, static_cast<int>(d.labels[i]));
    }
    d.class_count = max_label + 1;
    return d;
  };
  DatasetPair pair;
  pair.train = load_split(train_images_path, train_labels_path, "train", 0);
  pair.eval = load_split(eval_images_path, eval_labels_path, "eval", 1ULL << 32);
  const int classes = std::max(pair.train.class_count, pair.eval.class_count);
  pair.train.class_count = classes;
  pair.eval.class_count = classes;
  for (int c = 0; c < classes; ++c) {
    pair.train.class_names.push_back("digit-" + std::to_string(c));
    pair.eval.class_names.push_back("digit-" + std::to_string(c));
  }
  compute_norm_stats(pair.train, pair.train.norm_mean, pair.train.norm_std);
  pair.eval.norm_mean = pair.train.norm_mean;
  pair.eval.norm_std = pair.train.norm_std;
  apply_normalization(pair.train);
  apply_normalization(pair.eval);
  return pair;
}

DatasetPair import_cifar10(const std::vector<std::string>& train_bins,
                           const std::vector<std::string>& eval_bins, const std::string& name) {
  constexpr std::size_t kRecord = 1 + 3 * 32 * 32;
  auto load_bins = [&](const std::vector<std::string>& paths, const std::string& split,
                       std::uint64_t id_base) {
    Dataset d;
    d.name = name;
    d.split = split;
    d.channels = 3;
    d.height = 32;
    d.width = 32;
    d.class_count = 10;
    std::uint64_t id = id_base;
    for (const std::string& path : paths) {
      const std::vector<std::uint8_t> bytes = read_file(path);
      if (bytes.empty() || bytes.size() % kRecord != 0) {
        fail(ErrorCategory::format, "'" + path + "' is not a CIFAR-10 batch (size " +
                                        std::to_string(bytes.size()) + ")");
      }
      const std::size_t n = bytes.size() / kRecord;
      for (std::size_t i = 0; i < n; ++i) {
        const std::uint8_t* rec = bytes.data() + i * kRecord;
        if (rec[0] > 9) fail(ErrorCategory::format, "CIFAR-10 label out of range");
        d.labels.push_back(rec[0]);
        d.sample_ids.push_back(id++);
        d.raw.insert(d.raw.end(), rec + 1, rec + kRecord);
      }
    }
    if (d.labels.empty()) fail(ErrorCategory::data, "no CIFAR records in " + split + " split");
    return d;
  };
  DatasetPair pair;
  pair.train = load_bins(train_bins, "train", 0);
  pair.eval = load_bins(eval_bins, "eval", 1ULL << 32);
  static const char* kCifarNames[10] = {"airplane", "automobile", "bird", "cat", "deer",
                                        "dog", "frog", "horse", "ship", "truck"};
  for (const char* n : kCifarNames) {
    pair.train.class_names.push_back(n);
    pair.eval.class_names.push_back(n);
  }
  compute_norm_stats(pair.train, pair.train.norm_mean, pair.train.norm_std);
  pair.eval.norm_mean = pair.train.norm_mean;
  pair.eval.norm_std = pair.train.norm_std;
  apply_normalization(pair.train);
  apply_normalization(pair.eval);
  return pair;
}

}  // namespace prunekit
