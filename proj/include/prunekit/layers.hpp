#pragma once

#include <algorithm>
#include <cstddef>
#include <string>
#include <vector>

#include "prunekit/tensor.hpp"

namespace prunekit {

enum class LayerKind { conv2d, dense, relu, maxpool2x2, softmax_xent };

inline const char* layer_kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::dense: return "dense";
    case LayerKind::relu: return "relu";
    case LayerKind::maxpool2x2: return "maxpool2x2";
    case LayerKind::softmax_xent: return "softmax-xent";
  }
  return "?";
}

// Parameters of one layer. conv2d carries weights [out][in][kh][kw] and
// bias [out]; dense carries weights [out][in] and bias [out]; the other
// kinds are weightless. Convolutions are stride 1 with symmetric zero
// padding that preserves the spatial size (odd kernels only); maxpool is
// fixed 2x2 stride 2.
template <typename T>
struct LayerParams {
  LayerKind kind = LayerKind::relu;
  Tensor<T> weights;
  Tensor<T> bias;

  bool has_weights() const {
    return kind == LayerKind::conv2d || kind == LayerKind::dense;
  }

  std::size_t out_channels() const {
    return has_weights() ? weights.dim(0) : 0;
  }
};

template <typename T>
LayerParams<T> make_conv(std::size_t out_ch, std::size_t in_ch, std::size_t kh, std::size_t kw) {
  if (kh % 2 == 0 || kw % 2 == 0) {
    fail(ErrorCategory::shape, "conv kernel must be odd for same-padding, got " +
                                   std::to_string(kh) + "x" + std::to_string(kw));
  }
  LayerParams<T> p;
  p.kind = LayerKind::conv2d;
  p.weights = Tensor<T>({out_ch, in_ch, kh, kw});
  p.bias = Tensor<T>({out_ch});
  return p;
}

template <typename T>
LayerParams<T> make_dense(std::size_t out, std::size_t in) {
  LayerParams<T> p;
  p.kind = LayerKind::dense;
  p.weights = Tensor<T>({out, in});
  p.bias = Tensor<T>({out});
  return p;
}

template <typename T>
LayerParams<T> make_plain(LayerKind kind) {
  LayerParams<T> p;
  p.kind = kind;
  return p;
}

namespace detail {

[[noreturn]] inline void shape_error(LayerKind kind, const std::string& expected,
                                     const std::vector<std::size_t>& actual) {
  fail(ErrorCategory::shape, std::string(layer_kind_name(kind)) + ": expected input " +
                                 expected + ", got " + shape_str(actual));
}

}  // namespace detail

// Output shape for a layer given an input shape (leading batch dim).
template <typename T>
std::vector<std::size_t> layer_output_shape(const LayerParams<T>& params,
                                            const std::vector<std::size_t>& in_shape) {
  switch (params.kind) {
    case LayerKind::conv2d: {
      if (in_shape.size() != 4) detail::shape_error(params.kind, "[NxCxHxW]", in_shape);
      if (in_shape[1] != params.weights.dim(1)) {
        detail::shape_error(params.kind,
                            "[Nx" + std::to_string(params.weights.dim(1)) + "xHxW]", in_shape);
      }
      return {in_shape[0], params.weights.dim(0), in_shape[2], in_shape[3]};
    }
    case LayerKind::dense: {
      std::size_t features = 1;
      for (std::size_t i = 1; i < in_shape.size(); ++i) features *= in_shape[i];
      if (in_shape.empty() || features != params.weights.dim(1)) {
        detail::shape_error(params.kind, "[Nx" + std::to_string(params.weights.dim(1)) + "]",
                            in_shape);
      }
      return {in_shape[0], params.weights.dim(0)};
    }
    case LayerKind::relu:
      return in_shape;
    case LayerKind::maxpool2x2: {
      if (in_shape.size() != 4) detail::shape_error(params.kind, "[NxCxHxW]", in_shape);
      if (in_shape[2] % 2 != 0 || in_shape[3] % 2 != 0) {
        detail::shape_error(params.kind, "[NxCxHxW] with even H,W", in_shape);
      }
      return {in_shape[0], in_shape[1], in_shape[2] / 2, in_shape[3] / 2};
    }
    case LayerKind::softmax_xent: {
      if (in_shape.size() != 2) detail::shape_error(params.kind, "[NxClasses]", in_shape);
      return in_shape;
    }
  }
  fail(ErrorCategory::shape, "unknown layer kind");
}

// Forward pass. Deterministic; output finite whenever input and weights are.
template <typename T>
Tensor<T> layer_apply(const LayerParams<T>& params, const Tensor<T>& input) {
  Tensor<T> out(layer_output_shape(params, input.shape));
  switch (params.kind) {
    case LayerKind::conv2d: {
      const std::size_t n = input.dim(0), in_ch = input.dim(1);
      const std::size_t h = input.dim(2), w = input.dim(3);
      const std::size_t out_ch = params.weights.dim(0);
      const std::size_t kh = params.weights.dim(2), kw = params.weights.dim(3);
      const std::size_t pad_h = (kh - 1) / 2, pad_w = (kw - 1) / 2;
      const T* wp_base = params.weights.data.data();
      for (std::size_t b = 0; b < n; ++b) {
        const T* in_img = input.data.data() + b * in_ch * h * w;
        T* out_img = out.data.data() + b * out_ch * h * w;
        for (std::size_t oc = 0; oc < out_ch; ++oc) {
          T* out_map = out_img + oc * h * w;
          const T bias = params.bias[oc];
          for (std::size_t i = 0; i < h * w; ++i) out_map[i] = bias;
          for (std::size_t ic = 0; ic < in_ch; ++ic) {
            const T* in_map = in_img + ic * h * w;
            const T* wp = wp_base + ((oc * in_ch + ic) * kh) * kw;
            for (std::size_t ky = 0; ky < kh; ++ky) {
              for (std::size_t kx = 0; kx < kw; ++kx) {
                const T wv = wp[ky * kw + kx];
                if (wv == T(0)) continue;
                // input row index is oy + ky - pad_h, clipped to [0, h)
                const std::ptrdiff_t sh = static_cast<std::ptrdiff_t>(h);
                const std::ptrdiff_t sw = static_cast<std::ptrdiff_t>(w);
                const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky) -
                                          static_cast<std::ptrdiff_t>(pad_h);
                const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) -
                                          static_cast<std::ptrdiff_t>(pad_w);
                const std::ptrdiff_t oy_lo = std::max<std::ptrdiff_t>(0, -dy);
                const std::ptrdiff_t oy_hi = std::max<std::ptrdiff_t>(0, std::min(sh, sh - dy));
                const std::ptrdiff_t ox_lo = std::max<std::ptrdiff_t>(0, -dx);
                const std::ptrdiff_t ox_hi = std::max<std::ptrdiff_t>(0, std::min(sw, sw - dx));
                for (std::ptrdiff_t oy = oy_lo; oy < oy_hi; ++oy) {
                  const T* in_row = in_map + (oy + dy) * sw + dx;
                  T* out_row = out_map + oy * sw;
                  for (std::ptrdiff_t ox = ox_lo; ox < ox_hi; ++ox) {
                    out_row[ox] += wv * in_row[ox];
                  }
                }
              }
            }
          }
        }
      }
      break;
    }
    case LayerKind::dense: {
      const std::size_t n = input.dim(0);
      const std::size_t in_f = params.weights.dim(1), out_f = params.weights.dim(0);
      for (std::size_t b = 0; b < n; ++b) {
        const T* in_row = input.data.data() + b * in_f;
        T* out_row = out.data.data() + b * out_f;
        for (std::size_t o = 0; o < out_f; ++o) {
          const T* wrow = params.weights.data.data() + o * in_f;
          T acc = params.bias[o];
          for (std::size_t i = 0; i < in_f; ++i) acc += wrow[i] * in_row[i];
          out_row[o] = acc;
        }
      }
      break;
    }
    case LayerKind::relu: {
      for (std::size_t i = 0; i < input.size(); ++i) {
        out.data[i] = input.data[i] > T(0) ? input.data[i] : T(0);
      }
      break;
    }
    case LayerKind::maxpool2x2: {
      const std::size_t n = input.dim(0), c = input.dim(1);
      const std::size_t h = input.dim(2), w = input.dim(3);
      const std::size_t oh = h / 2, ow = w / 2;
      for (std::size_t bc = 0; bc < n * c; ++bc) {
        const T* in_map = input.data.data() + bc * h * w;
        T* out_map = out.data.data() + bc * oh * ow;
        for (std::size_t oy = 0; oy < oh; ++oy) {
          for (std::size_t ox = 0; ox < ow; ++ox) {
            const T* p = in_map + (2 * oy) * w + 2 * ox;
            T m = p[0];
            if (p[1] > m) m = p[1];
            if (p[w] > m) m = p[w];
            if (p[w + 1] > m) m = p[w + 1];
            out_map[oy * ow + ox] = m;
          }
        }
      }
      break;
    }
    case LayerKind::softmax_xent: {
      // Emits softmax probabilities (numerically stabilized). The paired
      // cross-entropy lives in the network-level loss driver.
      const std::size_t n = input.dim(0), c = input.dim(1);
      for (std::size_t b = 0; b < n; ++b) {
        const T* in_row = input.data.data() + b * c;
        T* out_row = out.data.data() + b * c;
        T mx = in_row[0];
        for (std::size_t i = 1; i < c; ++i) mx = std::max(mx, in_row[i]);
        T sum = T(0);
        for (std::size_t i = 0; i < c; ++i) {
          out_row[i] = std::exp(in_row[i] - mx);
          sum += out_row[i];
        }
        for (std::size_t i = 0; i < c; ++i) out_row[i] /= sum;
      }
      break;
    }
  }
  require_finite(out, std::string(layer_kind_name(params.kind)) + " forward output");
  return out;
}

// Gradients produced by one backward step. weight_grad/bias_grad are empty
// for weightless layers.
template <typename T>
struct LayerGrads {
  Tensor<T> input_grad;
  Tensor<T> weight_grad;
  Tensor<T> bias_grad;
};

// Exact reverse-mode gradients for the forward definitions above.
// upstream_grad must have the forward output shape.
template <typename T>
LayerGrads<T> layer_backprop(const LayerParams<T>& params, const Tensor<T>& input,
                             const Tensor<T>& upstream_grad) {
  const std::vector<std::size_t> out_shape = layer_output_shape(params, input.shape);
  if (upstream_grad.shape != out_shape) {
    fail(ErrorCategory::shape,
         std::string(layer_kind_name(params.kind)) + ": upstream grad shape " +
             shape_str(upstream_grad.shape) + " does not match output " + shape_str(out_shape));
  }
  LayerGrads<T> g;
  g.input_grad = Tensor<T>(input.shape);
  if (params.has_weights()) {
    g.weight_grad = Tensor<T>(params.weights.shape);
    g.bias_grad = Tensor<T>(params.bias.shape);
  }
  switch (params.kind) {
    case LayerKind::conv2d: {
      const std::size_t n = input.dim(0), in_ch = input.dim(1);
      const std::size_t h = input.dim(2), w = input.dim(3);
      const std::size_t out_ch = params.weights.dim(0);
      const std::size_t kh = params.weights.dim(2), kw = params.weights.dim(3);
      const std::ptrdiff_t pad_h = static_cast<std::ptrdiff_t>((kh - 1) / 2);
      const std::ptrdiff_t pad_w = static_cast<std::ptrdiff_t>((kw - 1) / 2);
      for (std::size_t b = 0; b < n; ++b) {
        const T* in_img = input.data.data() + b * in_ch * h * w;
        const T* ug_img = upstream_grad.data.data() + b * out_ch * h * w;
        T* ig_img = g.input_grad.data.data() + b * in_ch * h * w;
        for (std::size_t oc = 0; oc < out_ch; ++oc) {
          const T* ug_map = ug_img + oc * h * w;
          T bias_acc = T(0);
          for (std::size_t i = 0; i < h * w; ++i) bias_acc += ug_map[i];
          g.bias_grad[oc] += bias_acc;
          for (std::size_t ic = 0; ic < in_ch; ++ic) {
            const T* in_map = in_img + ic * h * w;
            T* ig_map = ig_img + ic * h * w;
            const std::size_t wbase = ((oc * in_ch + ic) * kh) * kw;
            for (std::size_t ky = 0; ky < kh; ++ky) {
              for (std::size_t kx = 0; kx < kw; ++kx) {
                const std::ptrdiff_t sh = static_cast<std::ptrdiff_t>(h);
                const std::ptrdiff_t sw = static_cast<std::ptrdiff_t>(w);
                const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky) - pad_h;
                const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - pad_w;
                const std::ptrdiff_t oy_lo = std::max<std::ptrdiff_t>(0, -dy);
                const std::ptrdiff_t oy_hi = std::max<std::ptrdiff_t>(0, std::min(sh, sh - dy));
                const std::ptrdiff_t ox_lo = std::max<std::ptrdiff_t>(0, -dx);
                const std::ptrdiff_t ox_hi = std::max<std::ptrdiff_t>(0, std::min(sw, sw - dx));
                const T wv = params.weights[wbase + ky * kw + kx];
                T wg_acc = T(0);
                for (std::ptrdiff_t oy = oy_lo; oy < oy_hi; ++oy) {
                  const T* ug_row = ug_map + oy * sw;
                  const T* in_row = in_map + (oy + dy) * sw + dx;
                  T* ig_row = ig_map + (oy + dy) * sw + dx;
                  for (std::ptrdiff_t ox = ox_lo; ox < ox_hi; ++ox) {
                    wg_acc += ug_row[ox] * in_row[ox];
                    ig_row[ox] += ug_row[ox] * wv;
                  }
                }
                g.weight_grad[wbase + ky * kw + kx] += wg_acc;
              }
            }
          }
        }
      }
      break;
    }
    case LayerKind::dense: {
      const std::size_t n = input.dim(0);
      const std::size_t in_f = params.weights.dim(1), out_f = params.weights.dim(0);
      for (std::size_t b = 0; b < n; ++b) {
        const T* in_row = input.data.data() + b * in_f;
        const T* ug_row = upstream_grad.data.data() + b * out_f;
        T* ig_row = g.input_grad.data.data() + b * in_f;
        for (std::size_t o = 0; o < out_f; ++o) {
          const T ug = ug_row[o];
          if (ug == T(0)) continue;
          const T* wrow = params.weights.data.data() + o * in_f;
          T* wgrow = g.weight_grad.data.data() + o * in_f;
          g.bias_grad[o] += ug;
          for (std::size_t i = 0; i < in_f; ++i) {
            wgrow[i] += ug * in_row[i];
            ig_row[i] += ug * wrow[i];
          }
        }
      }
      break;
    }
    case LayerKind::relu: {
      for (std::size_t i = 0; i < input.size(); ++i) {
        g.input_grad.data[i] = input.data[i] > T(0) ? upstream_grad.data[i] : T(0);
      }
      break;
    }
    case LayerKind::maxpool2x2: {
      const std::size_t n = input.dim(0), c = input.dim(1);
      const std::size_t h = input.dim(2), w = input.dim(3);
      const std::size_t oh = h / 2, ow = w / 2;
      for (std::size_t bc = 0; bc < n * c; ++bc) {
        const T* in_map = input.data.data() + bc * h * w;
        const T* ug_map = upstream_grad.data.data() + bc * oh * ow;
        T* ig_map = g.input_grad.data.data() + bc * h * w;
        for (std::size_t oy = 0; oy < oh; ++oy) {
          for (std::size_t ox = 0; ox < ow; ++ox) {
            // Route gradient to the first maximal element of the window,
            // matching the forward's selection.
            const std::size_t base = (2 * oy) * w + 2 * ox;
            const std::size_t idx[4] = {base, base + 1, base + w, base + w + 1};
            std::size_t best = idx[0];
            for (int k = 1; k < 4; ++k) {
              if (in_map[idx[k]] > in_map[best]) best = idx[k];
            }
            ig_map[best] += ug_map[oy * ow + ox];
          }
        }
      }
      break;
    }
    case LayerKind::softmax_xent: {
      // Jacobian of softmax: dx_i = p_i * (g_i - sum_j g_j p_j).
      const std::size_t n = input.dim(0), c = input.dim(1);
      Tensor<T> probs = layer_apply(params, input);
      for (std::size_t b = 0; b < n; ++b) {
        const T* p = probs.data.data() + b * c;
        const T* ug = upstream_grad.data.data() + b * c;
        T* ig = g.input_grad.data.data() + b * c;
        T dot = T(0);
        for (std::size_t i = 0; i < c; ++i) dot += ug[i] * p[i];
        for (std::size_t i = 0; i < c; ++i) ig[i] = p[i] * (ug[i] - dot);
      }
      break;
    }
  }
  require_finite(g.input_grad, std::string(layer_kind_name(params.kind)) + " input grad");
  if (params.has_weights()) {
    require_finite(g.weight_grad, std::string(layer_kind_name(params.kind)) + " weight grad");
    require_finite(g.bias_grad, std::string(layer_kind_name(params.kind)) + " bias grad");
  }
  return g;
}

}  // namespace prunekit
