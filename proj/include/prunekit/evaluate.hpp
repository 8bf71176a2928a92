#pragma once

#include <cstdlib>
#include <thread>
#include <vector>

#include "prunekit/dataset.hpp"
#include "prunekit/netgraph.hpp"

namespace prunekit {

// Worker count for batch-parallel evaluation. PRUNEKIT_THREADS overrides;
// evaluation is exact regardless of the thread count because per-image
// predictions are independent and the reduction is an integer count.
inline unsigned eval_thread_count() {
  if (const char* env = std::getenv("PRUNEKIT_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1 && v <= 256) return static_cast<unsigned>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : std::min(hw, 8u);
}

// Predicted class per sample: argmax over the logits, ties broken toward
// the lower class index.
template <typename T>
std::vector<std::int32_t> predict(const NetworkGraph<T>& net, const Dataset& data,
                                  std::size_t batch_size = 64) {
  if (net.class_count != data.class_count) {
    fail(ErrorCategory::data, "network expects " + std::to_string(net.class_count) +
                                  " classes, dataset has " + std::to_string(data.class_count));
  }
  if (net.input_channels != data.channels || net.input_height != data.height ||
      net.input_width != data.width) {
    fail(ErrorCategory::shape, "network input " + shape_str(net.input_shape(1)) +
                                   " does not fit dataset images");
  }
  std::vector<std::int32_t> predictions(data.size());
  const unsigned threads = std::min<unsigned>(eval_thread_count(),
                                              std::max<std::size_t>(1, data.size() / 32));
  auto worker = [&](std::size_t lo, std::size_t hi) {
    for (std::size_t start = lo; start < hi; start += batch_size) {
      const std::size_t end = std::min(hi, start + batch_size);
      std::vector<std::size_t> idx(end - start);
      for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = start + i;
      Tensor<T> batch = batch_images<T>(data, idx);
      Tensor<T> logits = forward_logits(net, batch);
      const std::size_t classes = logits.dim(1);
      for (std::size_t b = 0; b < idx.size(); ++b) {
        const T* row = logits.data.data() + b * classes;
        std::size_t best = 0;
        for (std::size_t c = 1; c < classes; ++c) {
          if (row[c] > row[best]) best = c;
        }
        predictions[idx[b]] = static_cast<std::int32_t>(best);
      }
    }
  };
  if (threads <= 1) {
    worker(0, data.size());
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (data.size() + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
      const std::size_t lo = t * chunk;
      const std::size_t hi = std::min(data.size(), lo + chunk);
      if (lo >= hi) break;
      pool.emplace_back(worker, lo, hi);
    }
    for (auto& th : pool) th.join();
  }
  return predictions;
}

// Top-1 accuracy.
template <typename T>
double evaluate(const NetworkGraph<T>& net, const Dataset& data, std::size_t batch_size = 64) {
  if (data.size() == 0) fail(ErrorCategory::data, "cannot evaluate on an empty dataset");
  const std::vector<std::int32_t> predictions = predict(net, data, batch_size);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (predictions[i] == data.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

}  // namespace prunekit
