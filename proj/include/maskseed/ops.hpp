#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "maskseed/errors.hpp"
#include "maskseed/rng.hpp"
#include "maskseed/tensor.hpp"

namespace maskseed::nn {

using maskseed::Tensor;

// One layer's trainable state: weights, bias, and their momentum buffers.
// Momentum buffers are zero at construction and keep the weight shapes.
template <class T>
struct LayerParams {
  Tensor<T> weights;
  Tensor<T> bias;
  Tensor<T> weight_momentum;
  Tensor<T> bias_momentum;

  LayerParams() = default;
  LayerParams(std::vector<int> wshape, std::vector<int> bshape)
      : weights(wshape),
        bias(bshape),
        weight_momentum(std::move(wshape)),
        bias_momentum(std::move(bshape)) {}
};

// --------------------------------------------------------------- conv2d

// Cross-correlation (no kernel flip). input C×H×W, weights O×C×K×K, bias O.
// Output O×H'×W' with H' = (H + 2·pad − K)/stride + 1.
template <class T>
Tensor<T> conv2d(const Tensor<T>& input, const LayerParams<T>& params, int stride, int pad) {
  if (input.rank() != 3) throw UsageError("conv2d: input must be C×H×W, got " + shape_str(input.shape));
  if (params.weights.rank() != 4) throw ConfigError("conv2d: weights must be O×C×K×K");
  if (stride < 1) throw UsageError("conv2d: stride must be >= 1");
  const int in_c = input.dim(0), in_h = input.dim(1), in_w = input.dim(2);
  const int out_c = params.weights.dim(0);
  const int k_h = params.weights.dim(2), k_w = params.weights.dim(3);
  if (params.weights.dim(1) != in_c) {
    throw ConfigError("conv2d: kernel expects " + std::to_string(params.weights.dim(1)) +
                      " input channels, input has " + std::to_string(in_c));
  }
  if (in_h + 2 * pad < k_h || in_w + 2 * pad < k_w) {
    throw UsageError("conv2d: kernel does not fit padded input");
  }
  const int out_h = (in_h + 2 * pad - k_h) / stride + 1;
  const int out_w = (in_w + 2 * pad - k_w) / stride + 1;

  Tensor<T> out({out_c, out_h, out_w});
  for (int oc = 0; oc < out_c; ++oc) {
    T* out_plane = out.ptr() + static_cast<std::size_t>(oc) * out_h * out_w;
    const T b = params.bias.data[static_cast<std::size_t>(oc)];
    for (std::size_t i = 0; i < static_cast<std::size_t>(out_h) * out_w; ++i) out_plane[i] = b;
    for (int ic = 0; ic < in_c; ++ic) {
      const T* in_plane = input.ptr() + static_cast<std::size_t>(ic) * in_h * in_w;
      for (int ky = 0; ky < k_h; ++ky) {
        for (int kx = 0; kx < k_w; ++kx) {
          const T w = params.weights.at4(oc, ic, ky, kx);
          for (int oy = 0; oy < out_h; ++oy) {
            const int iy = oy * stride + ky - pad;
            if (iy < 0 || iy >= in_h) continue;
            const T* in_row = in_plane + static_cast<std::size_t>(iy) * in_w;
            T* out_row = out_plane + static_cast<std::size_t>(oy) * out_w;
            // clip ox so that ix = ox·stride + kx − pad stays in [0, in_w)
            int ox0 = 0;
            int ix0 = kx - pad;
            while (ix0 < 0) { ix0 += stride; ++ox0; }
            int ox1 = out_w;
            while (ox1 > ox0 && (ox1 - 1) * stride + kx - pad >= in_w) --ox1;
            const T* in_p = in_row + ix0;
            if (stride == 1) {
              for (int ox = ox0; ox < ox1; ++ox) out_row[ox] += w * in_p[ox - ox0];
            } else {
              for (int ox = ox0; ox < ox1; ++ox) out_row[ox] += w * in_p[(ox - ox0) * stride];
            }
          }
        }
      }
    }
  }
  require_finite(out, "conv2d");
  return out;
}

template <class T>
struct Conv2dGrads {
  Tensor<T> input;
  Tensor<T> weights;
  Tensor<T> bias;
};

template <class T>
Conv2dGrads<T> conv2d_backward(const Tensor<T>& grad_out, const Tensor<T>& saved_input,
                               const LayerParams<T>& params, int stride, int pad) {
  if (saved_input.rank() != 3 || grad_out.rank() != 3) {
    throw UsageError("conv2d_backward: missing or malformed saved forward state");
  }
  const int in_c = saved_input.dim(0), in_h = saved_input.dim(1), in_w = saved_input.dim(2);
  const int out_c = grad_out.dim(0), out_h = grad_out.dim(1), out_w = grad_out.dim(2);
  const int k_h = params.weights.dim(2), k_w = params.weights.dim(3);
  if (params.weights.dim(0) != out_c || params.weights.dim(1) != in_c) {
    throw UsageError("conv2d_backward: shapes do not match the forward call");
  }

  Conv2dGrads<T> g;
  g.input = Tensor<T>({in_c, in_h, in_w});
  g.weights = Tensor<T>(params.weights.shape);
  g.bias = Tensor<T>(params.bias.shape);

  for (int oc = 0; oc < out_c; ++oc) {
    const T* go_plane = grad_out.ptr() + static_cast<std::size_t>(oc) * out_h * out_w;
    T gb = 0;
    for (std::size_t i = 0; i < static_cast<std::size_t>(out_h) * out_w; ++i) gb += go_plane[i];
    g.bias.data[static_cast<std::size_t>(oc)] = gb;
    for (int ic = 0; ic < in_c; ++ic) {
      const T* in_plane = saved_input.ptr() + static_cast<std::size_t>(ic) * in_h * in_w;
      T* gi_plane = g.input.ptr() + static_cast<std::size_t>(ic) * in_h * in_w;
      for (int ky = 0; ky < k_h; ++ky) {
        for (int kx = 0; kx < k_w; ++kx) {
          const T w = params.weights.at4(oc, ic, ky, kx);
          T gw = 0;
          for (int oy = 0; oy < out_h; ++oy) {
            const int iy = oy * stride + ky - pad;
            if (iy < 0 || iy >= in_h) continue;
            const T* in_row = in_plane + static_cast<std::size_t>(iy) * in_w;
            T* gi_row = gi_plane + static_cast<std::size_t>(iy) * in_w;
            const T* go_row = go_plane + static_cast<std::size_t>(oy) * out_w;
            int ox0 = 0;
            int ix0 = kx - pad;
            while (ix0 < 0) { ix0 += stride; ++ox0; }
            int ox1 = out_w;
            while (ox1 > ox0 && (ox1 - 1) * stride + kx - pad >= in_w) --ox1;
            if (stride == 1) {
              const T* in_p = in_row + ix0;
              T* gi_p = gi_row + ix0;
              for (int ox = ox0; ox < ox1; ++ox) gw += go_row[ox] * in_p[ox - ox0];
              for (int ox = ox0; ox < ox1; ++ox) gi_p[ox - ox0] += go_row[ox] * w;
            } else {
              for (int ox = ox0; ox < ox1; ++ox) {
                const int ix = ix0 + (ox - ox0) * stride;
                gw += go_row[ox] * in_row[ix];
                gi_row[ix] += go_row[ox] * w;
              }
            }
          }
          g.weights.at4(oc, ic, ky, kx) = gw;
        }
      }
    }
  }
  require_finite(g.input, "conv2d_backward");
  return g;
}

// --------------------------------------------------------------- maxpool 2×2

template <class T>
struct PoolResult {
  Tensor<T> output;
  Tensor<std::int32_t> argmax;  // flat offset into the input plane, per output cell
};

// 2×2 stride-2 max pooling; ties resolve to the first (row-major) maximum.
template <class T>
PoolResult<T> maxpool2x2(const Tensor<T>& input) {
  if (input.rank() != 3) throw UsageError("maxpool2x2: input must be C×H×W");
  const int c = input.dim(0), h = input.dim(1), w = input.dim(2);
  if (h % 2 != 0 || w % 2 != 0) {
    throw ConfigError("maxpool2x2: spatial dims must be even, got " + shape_str(input.shape));
  }
  PoolResult<T> r{Tensor<T>({c, h / 2, w / 2}), Tensor<std::int32_t>({c, h / 2, w / 2})};
  for (int ch = 0; ch < c; ++ch) {
    const T* in_plane = input.ptr() + static_cast<std::size_t>(ch) * h * w;
    for (int oy = 0; oy < h / 2; ++oy) {
      for (int ox = 0; ox < w / 2; ++ox) {
        const int base = 2 * oy * w + 2 * ox;
        const int offsets[4] = {base, base + 1, base + w, base + w + 1};
        int best = offsets[0];
        T best_v = in_plane[offsets[0]];
        for (int i = 1; i < 4; ++i) {
          if (in_plane[offsets[i]] > best_v) {
            best_v = in_plane[offsets[i]];
            best = offsets[i];
          }
        }
        r.output.at3(ch, oy, ox) = best_v;
        r.argmax.at3(ch, oy, ox) = best;
      }
    }
  }
  return r;
}

template <class T>
Tensor<T> maxpool2x2_backward(const Tensor<T>& grad_out, const Tensor<std::int32_t>& argmax,
                              int in_h, int in_w) {
  if (!std::equal(grad_out.shape.begin(), grad_out.shape.end(), argmax.shape.begin())) {
    throw UsageError("maxpool2x2_backward: grad/argmax shape mismatch");
  }
  const int c = grad_out.dim(0), oh = grad_out.dim(1), ow = grad_out.dim(2);
  Tensor<T> gi({c, in_h, in_w});
  for (int ch = 0; ch < c; ++ch) {
    T* gi_plane = gi.ptr() + static_cast<std::size_t>(ch) * in_h * in_w;
    const T* go_plane = grad_out.ptr() + static_cast<std::size_t>(ch) * oh * ow;
    const std::int32_t* am_plane = argmax.ptr() + static_cast<std::size_t>(ch) * oh * ow;
    for (std::size_t i = 0; i < static_cast<std::size_t>(oh) * ow; ++i) {
      gi_plane[am_plane[i]] += go_plane[i];
    }
  }
  return gi;
}

// --------------------------------------------------------------- relu

template <class T>
Tensor<T> relu(const Tensor<T>& input) {
  Tensor<T> out;
  out.shape = input.shape;
  out.data.resize(input.data.size());
  for (std::size_t i = 0; i < input.data.size(); ++i) {
    out.data[i] = input.data[i] > T(0) ? input.data[i] : T(0);
  }
  return out;
}

template <class T>
Tensor<T> relu_backward(const Tensor<T>& grad_out, const Tensor<T>& saved_input) {
  if (!grad_out.same_shape(saved_input)) throw UsageError("relu_backward: shape mismatch");
  Tensor<T> gi;
  gi.shape = grad_out.shape;
  gi.data.resize(grad_out.data.size());
  for (std::size_t i = 0; i < grad_out.data.size(); ++i) {
    gi.data[i] = saved_input.data[i] > T(0) ? grad_out.data[i] : T(0);
  }
  return gi;
}

// --------------------------------------------------------------- linear

// y = Wx + b. weights OUT×IN over a flat input. The inner loop walks the flat
// input in order, so a linear over a flattened C×H×W window performs the same
// additions in the same order as a full-window convolution; dense inference
// relies on that agreement.
template <class T>
Tensor<T> linear(const Tensor<T>& input, const LayerParams<T>& params) {
  if (params.weights.rank() != 2) throw ConfigError("linear: weights must be OUT×IN");
  const int in_n = static_cast<int>(input.numel());
  const int out_n = params.weights.dim(0);
  if (params.weights.dim(1) != in_n) {
    throw ConfigError("linear: weight input dim " + std::to_string(params.weights.dim(1)) +
                      " != input length " + std::to_string(in_n));
  }
  Tensor<T> out({out_n});
  const T* x = input.ptr();
  for (int o = 0; o < out_n; ++o) {
    const T* w_row = params.weights.ptr() + static_cast<std::size_t>(o) * in_n;
    T acc = params.bias.data[static_cast<std::size_t>(o)];
    for (int i = 0; i < in_n; ++i) acc += w_row[i] * x[i];
    out.data[static_cast<std::size_t>(o)] = acc;
  }
  require_finite(out, "linear");
  return out;
}

template <class T>
struct LinearGrads {
  Tensor<T> input;
  Tensor<T> weights;
  Tensor<T> bias;
};

template <class T>
LinearGrads<T> linear_backward(const Tensor<T>& grad_out, const Tensor<T>& saved_input,
                               const LayerParams<T>& params) {
  const int in_n = static_cast<int>(saved_input.numel());
  const int out_n = params.weights.dim(0);
  if (static_cast<int>(grad_out.numel()) != out_n) {
    throw UsageError("linear_backward: grad length does not match the forward call");
  }
  LinearGrads<T> g;
  g.input = Tensor<T>({in_n});
  g.weights = Tensor<T>(params.weights.shape);
  g.bias = Tensor<T>(params.bias.shape);
  const T* x = saved_input.ptr();
  for (int o = 0; o < out_n; ++o) {
    const T go = grad_out.data[static_cast<std::size_t>(o)];
    g.bias.data[static_cast<std::size_t>(o)] = go;
    const T* w_row = params.weights.ptr() + static_cast<std::size_t>(o) * in_n;
    T* gw_row = g.weights.ptr() + static_cast<std::size_t>(o) * in_n;
    T* gi = g.input.ptr();
    for (int i = 0; i < in_n; ++i) {
      gw_row[i] = go * x[i];
      gi[i] += go * w_row[i];
    }
  }
  return g;
}

// --------------------------------------------------------------- dropout

template <class T>
struct DropoutResult {
  Tensor<T> output;
  Tensor<T> mask;  // per-unit multiplier: 0 or 1/(1−rate)
};

// Inverted dropout: survivors are scaled at train time, inference is the
// identity.
template <class T>
DropoutResult<T> dropout(const Tensor<T>& input, double rate, Rng& rng, bool training) {
  if (rate < 0.0 || rate >= 1.0) throw UsageError("dropout: rate must be in [0,1)");
  DropoutResult<T> r;
  r.output.shape = input.shape;
  r.mask.shape = input.shape;
  r.output.data.resize(input.data.size());
  r.mask.data.resize(input.data.size());
  if (!training || rate == 0.0) {
    r.output.data = input.data;
    std::fill(r.mask.data.begin(), r.mask.data.end(), T(1));
    return r;
  }
  const T scale = static_cast<T>(1.0 / (1.0 - rate));
  for (std::size_t i = 0; i < input.data.size(); ++i) {
    const T m = rng.uniform() < rate ? T(0) : scale;
    r.mask.data[i] = m;
    r.output.data[i] = input.data[i] * m;
  }
  return r;
}

template <class T>
Tensor<T> dropout_backward(const Tensor<T>& grad_out, const Tensor<T>& mask) {
  if (!grad_out.same_shape(mask)) throw UsageError("dropout_backward: shape mismatch");
  Tensor<T> gi;
  gi.shape = grad_out.shape;
  gi.data.resize(grad_out.data.size());
  for (std::size_t i = 0; i < grad_out.data.size(); ++i) gi.data[i] = grad_out.data[i] * mask.data[i];
  return gi;
}

// --------------------------------------------------------------- bilinear upsample

// Corner-aligned bilinear interpolation: output index i samples source
// coordinate i·(src−1)/(dst−1), so equal sizes are the identity and constants
// are preserved exactly. Non-trainable.
template <class T>
Tensor<T> bilinear_upsample(const Tensor<T>& input, int out_h, int out_w) {
  if (input.rank() != 3) throw UsageError("bilinear_upsample: input must be C×H×W");
  const int c = input.dim(0), in_h = input.dim(1), in_w = input.dim(2);
  if (out_h < in_h || out_w < in_w) throw UsageError("bilinear_upsample: target dims must be >= source dims");
  if (out_h == in_h && out_w == in_w) return input;

  Tensor<T> out({c, out_h, out_w});
  const double sy = out_h > 1 ? static_cast<double>(in_h - 1) / (out_h - 1) : 0.0;
  const double sx = out_w > 1 ? static_cast<double>(in_w - 1) / (out_w - 1) : 0.0;
  for (int oy = 0; oy < out_h; ++oy) {
    const double fy = oy * sy;
    int y0 = static_cast<int>(fy);
    if (y0 > in_h - 2) y0 = in_h - 2;
    if (y0 < 0) y0 = 0;
    const double ty = in_h > 1 ? fy - y0 : 0.0;
    for (int ox = 0; ox < out_w; ++ox) {
      const double fx = ox * sx;
      int x0 = static_cast<int>(fx);
      if (x0 > in_w - 2) x0 = in_w - 2;
      if (x0 < 0) x0 = 0;
      const double tx = in_w > 1 ? fx - x0 : 0.0;
      for (int ch = 0; ch < c; ++ch) {
        const int y1 = in_h > 1 ? y0 + 1 : y0;
        const int x1 = in_w > 1 ? x0 + 1 : x0;
        const double v00 = input.at3(ch, y0, x0);
        const double v01 = input.at3(ch, y0, x1);
        const double v10 = input.at3(ch, y1, x0);
        const double v11 = input.at3(ch, y1, x1);
        const double top = v00 + (v01 - v00) * tx;
        const double bot = v10 + (v11 - v10) * tx;
        out.at3(ch, oy, ox) = static_cast<T>(top + (bot - top) * ty);
      }
    }
  }
  return out;
}

}  // namespace maskseed::nn
