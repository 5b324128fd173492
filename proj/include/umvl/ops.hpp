// Copyright 2026 The umvl Authors
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
//
// The four dense primitives behind the mask decoder: token-wise linear
// projection, stride-2 2x2 transposed convolution, per-site channel
// LayerNorm, and half-pixel bilinear resampling. Each op has a forward
// evaluation and a vjp that maps an upstream gradient to gradients with
// respect to every input. All math is in 64-bit floats.

#ifndef UMVL_OPS_HPP_
#define UMVL_OPS_HPP_

#include <algorithm>
#include <cstddef>
#include <vector>

#include "umvl/errors.hpp"
#include "umvl/tensor.hpp"

namespace umvl {

// ---------------------------------------------------------------------------
// Linear projection: out[i,j] = sum_k x[i,k] * w[k,j] + b[j]
// ---------------------------------------------------------------------------

inline Matrix linear_forward(const Matrix& x, const Matrix& w,
                             const std::vector<double>& b) {
  if (x.cols != w.rows) {
    throw DimensionError("linear_forward: inner axis mismatch, x.cols=" +
                         std::to_string(x.cols) + " vs w.rows=" + std::to_string(w.rows));
  }
  if (b.size() != w.cols) {
    throw DimensionError("linear_forward: bias axis mismatch, b.size=" +
                         std::to_string(b.size()) + " vs w.cols=" + std::to_string(w.cols));
  }
  Matrix out(x.rows, w.cols);
  for (std::size_t i = 0; i < x.rows; ++i) {
    for (std::size_t j = 0; j < w.cols; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < x.cols; ++k) {
        acc += x.at(i, k) * w.at(k, j);
      }
      out.at(i, j) = acc + b[j];
    }
  }
  return out;
}

struct LinearGrads {
  Matrix d_x;
  Matrix d_w;
  std::vector<double> d_b;
};

inline LinearGrads linear_vjp(const Matrix& x, const Matrix& w, const Matrix& grad_out) {
  if (grad_out.rows != x.rows || grad_out.cols != w.cols) {
    throw DimensionError("linear_vjp: upstream gradient shape mismatch");
  }
  LinearGrads g;
  g.d_x = Matrix(x.rows, x.cols);
  g.d_w = Matrix(w.rows, w.cols);
  g.d_b.assign(w.cols, 0.0);
  for (std::size_t i = 0; i < x.rows; ++i) {
    for (std::size_t k = 0; k < x.cols; ++k) {
      double acc = 0.0;
      for (std::size_t j = 0; j < w.cols; ++j) {
        acc += grad_out.at(i, j) * w.at(k, j);
      }
      g.d_x.at(i, k) = acc;
    }
  }
  for (std::size_t k = 0; k < w.rows; ++k) {
    for (std::size_t j = 0; j < w.cols; ++j) {
      double acc = 0.0;
      for (std::size_t i = 0; i < x.rows; ++i) {
        acc += x.at(i, k) * grad_out.at(i, j);
      }
      g.d_w.at(k, j) = acc;
    }
  }
  for (std::size_t j = 0; j < w.cols; ++j) {
    double acc = 0.0;
    for (std::size_t i = 0; i < x.rows; ++i) {
      acc += grad_out.at(i, j);
    }
    g.d_b[j] = acc;
  }
  return g;
}

// ---------------------------------------------------------------------------
// Transposed convolution, kernel 2x2, stride 2, no padding.
// out[co, 2i+a, 2j+b] = sum_ci in[ci, i, j] * k[ci, co, a, b]
// Every output pixel receives exactly one input tap.
// ---------------------------------------------------------------------------

inline FeatureMap deconv2x_forward(const FeatureMap& input, const KernelTensor& kernel) {
  if (kernel.in_channels != input.channels) {
    throw DimensionError("deconv2x_forward: channel axis mismatch, input.channels=" +
                         std::to_string(input.channels) + " vs kernel.in_channels=" +
                         std::to_string(kernel.in_channels));
  }
  FeatureMap out(kernel.out_channels, 2 * input.height, 2 * input.width);
  for (std::size_t co = 0; co < kernel.out_channels; ++co) {
    for (std::size_t i = 0; i < input.height; ++i) {
      for (std::size_t j = 0; j < input.width; ++j) {
        for (std::size_t a = 0; a < 2; ++a) {
          for (std::size_t b = 0; b < 2; ++b) {
            double acc = 0.0;
            for (std::size_t ci = 0; ci < input.channels; ++ci) {
              acc += input.at(ci, i, j) * kernel.at(ci, co, a, b);
            }
            out.at(co, 2 * i + a, 2 * j + b) = acc;
          }
        }
      }
    }
  }
  return out;
}

struct Deconv2xGrads {
  FeatureMap d_input;
  KernelTensor d_kernel;
};

inline Deconv2xGrads deconv2x_vjp(const FeatureMap& input, const KernelTensor& kernel,
                                  const FeatureMap& grad_out) {
  if (grad_out.channels != kernel.out_channels || grad_out.height != 2 * input.height ||
      grad_out.width != 2 * input.width) {
    throw DimensionError("deconv2x_vjp: upstream gradient shape mismatch");
  }
  Deconv2xGrads g;
  g.d_input = FeatureMap(input.channels, input.height, input.width);
  g.d_kernel = KernelTensor(kernel.in_channels, kernel.out_channels);
  for (std::size_t ci = 0; ci < input.channels; ++ci) {
    for (std::size_t i = 0; i < input.height; ++i) {
      for (std::size_t j = 0; j < input.width; ++j) {
        double acc = 0.0;
        for (std::size_t co = 0; co < kernel.out_channels; ++co) {
          for (std::size_t a = 0; a < 2; ++a) {
            for (std::size_t b = 0; b < 2; ++b) {
              acc += grad_out.at(co, 2 * i + a, 2 * j + b) * kernel.at(ci, co, a, b);
            }
          }
        }
        g.d_input.at(ci, i, j) = acc;
      }
    }
  }
  for (std::size_t ci = 0; ci < kernel.in_channels; ++ci) {
    for (std::size_t co = 0; co < kernel.out_channels; ++co) {
      for (std::size_t a = 0; a < 2; ++a) {
        for (std::size_t b = 0; b < 2; ++b) {
          double acc = 0.0;
          for (std::size_t i = 0; i < input.height; ++i) {
            for (std::size_t j = 0; j < input.width; ++j) {
              acc += input.at(ci, i, j) * grad_out.at(co, 2 * i + a, 2 * j + b);
            }
          }
          g.d_kernel.at(ci, co, a, b) = acc;
        }
      }
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// LayerNorm over the channel axis at each spatial site.
// mu, sigma^2 are taken over the C values at (y, x); variance is biased.
// ---------------------------------------------------------------------------

inline FeatureMap layernorm_forward(const FeatureMap& x, const std::vector<double>& gamma,
                                    const std::vector<double>& beta, double eps = 1e-5) {
  if (x.channels < 1) {
    throw DimensionError("layernorm_forward: channel axis must be >= 1");
  }
  if (gamma.size() != x.channels || beta.size() != x.channels) {
    throw DimensionError("layernorm_forward: affine axis mismatch, gamma.size=" +
                         std::to_string(gamma.size()) + " beta.size=" +
                         std::to_string(beta.size()) + " vs channels=" +
                         std::to_string(x.channels));
  }
  const std::size_t c_n = x.channels;
  FeatureMap out(c_n, x.height, x.width);
  for (std::size_t y = 0; y < x.height; ++y) {
    for (std::size_t xx = 0; xx < x.width; ++xx) {
      double mean = 0.0;
      for (std::size_t c = 0; c < c_n; ++c) mean += x.at(c, y, xx);
      mean /= static_cast<double>(c_n);
      double var = 0.0;
      for (std::size_t c = 0; c < c_n; ++c) {
        const double d = x.at(c, y, xx) - mean;
        var += d * d;
      }
      var /= static_cast<double>(c_n);
      const double inv_std = 1.0 / std::sqrt(var + eps);
      for (std::size_t c = 0; c < c_n; ++c) {
        out.at(c, y, xx) = gamma[c] * (x.at(c, y, xx) - mean) * inv_std + beta[c];
      }
    }
  }
  return out;
}

struct LayerNormGrads {
  FeatureMap d_x;
  std::vector<double> d_gamma;
  std::vector<double> d_beta;
};

inline LayerNormGrads layernorm_vjp(const FeatureMap& x, const std::vector<double>& gamma,
                                    const FeatureMap& grad_out, double eps = 1e-5) {
  if (grad_out.channels != x.channels || grad_out.height != x.height ||
      grad_out.width != x.width) {
    throw DimensionError("layernorm_vjp: upstream gradient shape mismatch");
  }
  if (gamma.size() != x.channels) {
    throw DimensionError("layernorm_vjp: gamma axis mismatch");
  }
  const std::size_t c_n = x.channels;
  LayerNormGrads g;
  g.d_x = FeatureMap(c_n, x.height, x.width);
  g.d_gamma.assign(c_n, 0.0);
  g.d_beta.assign(c_n, 0.0);
  std::vector<double> xhat(c_n), h(c_n);
  for (std::size_t y = 0; y < x.height; ++y) {
    for (std::size_t xx = 0; xx < x.width; ++xx) {
      double mean = 0.0;
      for (std::size_t c = 0; c < c_n; ++c) mean += x.at(c, y, xx);
      mean /= static_cast<double>(c_n);
      double var = 0.0;
      for (std::size_t c = 0; c < c_n; ++c) {
        const double d = x.at(c, y, xx) - mean;
        var += d * d;
      }
      var /= static_cast<double>(c_n);
      const double inv_std = 1.0 / std::sqrt(var + eps);
      // h = gamma .* g; dx = (h - mean(h) - xhat * mean(h .* xhat)) * inv_std
      double h_mean = 0.0, hx_mean = 0.0;
      for (std::size_t c = 0; c < c_n; ++c) {
        xhat[c] = (x.at(c, y, xx) - mean) * inv_std;
        h[c] = gamma[c] * grad_out.at(c, y, xx);
        h_mean += h[c];
        hx_mean += h[c] * xhat[c];
      }
      h_mean /= static_cast<double>(c_n);
      hx_mean /= static_cast<double>(c_n);
      for (std::size_t c = 0; c < c_n; ++c) {
        g.d_x.at(c, y, xx) = (h[c] - h_mean - xhat[c] * hx_mean) * inv_std;
        g.d_gamma[c] += grad_out.at(c, y, xx) * xhat[c];
        g.d_beta[c] += grad_out.at(c, y, xx);
      }
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// Bilinear resampling with half-pixel centers:
//   src = (dst + 0.5) * (in_size / out_size) - 0.5, clamped to [0, in_size-1]
// ---------------------------------------------------------------------------

namespace detail {

struct Tap {
  std::size_t lo;
  std::size_t hi;
  double frac;  // weight of hi; lo gets (1 - frac)
};

inline Tap sample_tap(std::size_t dst, std::size_t in_size, std::size_t out_size) {
  double src = (static_cast<double>(dst) + 0.5) *
                   (static_cast<double>(in_size) / static_cast<double>(out_size)) -
               0.5;
  src = std::clamp(src, 0.0, static_cast<double>(in_size - 1));
  const auto lo = static_cast<std::size_t>(src);
  const std::size_t hi = std::min(lo + 1, in_size - 1);
  return Tap{lo, hi, src - static_cast<double>(lo)};
}

}  // namespace detail

inline FeatureMap bilinear_upsample(const FeatureMap& x, std::size_t h_out, std::size_t w_out) {
  if (x.channels == 0 || x.height == 0 || x.width == 0) {
    throw DimensionError("bilinear_upsample: empty input map");
  }
  if (h_out < 1 || w_out < 1) {
    throw DimensionError("bilinear_upsample: target size must be >= 1");
  }
  FeatureMap out(x.channels, h_out, w_out);
  for (std::size_t y = 0; y < h_out; ++y) {
    const auto ty = detail::sample_tap(y, x.height, h_out);
    for (std::size_t xx = 0; xx < w_out; ++xx) {
      const auto tx = detail::sample_tap(xx, x.width, w_out);
      for (std::size_t c = 0; c < x.channels; ++c) {
        out.at(c, y, xx) = x.at(c, ty.lo, tx.lo) * (1.0 - ty.frac) * (1.0 - tx.frac) +
                           x.at(c, ty.lo, tx.hi) * (1.0 - ty.frac) * tx.frac +
                           x.at(c, ty.hi, tx.lo) * ty.frac * (1.0 - tx.frac) +
                           x.at(c, ty.hi, tx.hi) * ty.frac * tx.frac;
      }
    }
  }
  return out;
}

/// The upsample is linear in x, so the vjp is the transpose scatter of the
/// forward gather weights.
inline FeatureMap bilinear_upsample_vjp(const FeatureMap& x, const FeatureMap& grad_out) {
  if (grad_out.channels != x.channels) {
    throw DimensionError("bilinear_upsample_vjp: channel axis mismatch");
  }
  FeatureMap d_x(x.channels, x.height, x.width);
  for (std::size_t y = 0; y < grad_out.height; ++y) {
    const auto ty = detail::sample_tap(y, x.height, grad_out.height);
    for (std::size_t xx = 0; xx < grad_out.width; ++xx) {
      const auto tx = detail::sample_tap(xx, x.width, grad_out.width);
      for (std::size_t c = 0; c < x.channels; ++c) {
        const double g = grad_out.at(c, y, xx);
        d_x.at(c, ty.lo, tx.lo) += g * (1.0 - ty.frac) * (1.0 - tx.frac);
        d_x.at(c, ty.lo, tx.hi) += g * (1.0 - ty.frac) * tx.frac;
        d_x.at(c, ty.hi, tx.lo) += g * ty.frac * (1.0 - tx.frac);
        d_x.at(c, ty.hi, tx.hi) += g * ty.frac * tx.frac;
      }
    }
  }
  return d_x;
}

}  // namespace umvl

#endif  // UMVL_OPS_HPP_
