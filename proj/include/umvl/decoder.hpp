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
// Dynamic convolutional mask decoder. Image features are projected and
// reshaped into a spatial map; the N query features are projected into the
// weights of two stride-2 transposed convolutions (each query row supplies
// 1/N of a kernel, concatenated in row order); the map is upsampled through
// deconv -> LayerNorm -> deconv -> bilinear resize into mask logits. The
// learnable state is three linear maps plus one LayerNorm affine pair.

#ifndef UMVL_DECODER_HPP_
#define UMVL_DECODER_HPP_

#include <cstddef>
#include <string>
#include <vector>

#include "umvl/errors.hpp"
#include "umvl/ops.hpp"
#include "umvl/tensor.hpp"

namespace umvl {

struct DecoderConfig {
  std::size_t d_llm = 0;     // feature width of the upstream language model
  std::size_t c_dec = 128;   // decoder channel width
  std::size_t n_query = 16;  // mask-query tokens per segmentation target
  std::size_t h_vis = 0;     // visual token grid height
  std::size_t w_vis = 0;     // visual token grid width
  std::size_t h_out = 0;     // target mask height
  std::size_t w_out = 0;     // target mask width
  double eps = 1e-5;

  std::size_t vis_tokens() const { return h_vis * w_vis; }
  // Flat kernel sizes of the two deconv stages: [C, C, 2, 2] and [C, 1, 2, 2].
  std::size_t kernel1_size() const { return c_dec * c_dec * 4; }
  std::size_t kernel2_size() const { return c_dec * 4; }
  std::size_t chunk1() const { return kernel1_size() / n_query; }
  std::size_t chunk2() const { return kernel2_size() / n_query; }

  void validate() const {
    if (d_llm < 1 || c_dec < 1 || n_query < 1 || h_vis < 1 || w_vis < 1 ||
        h_out < 1 || w_out < 1) {
      throw ConfigError("DecoderConfig: all dimensions must be >= 1");
    }
    if (eps <= 0.0) {
      throw ConfigError("DecoderConfig: eps must be > 0");
    }
    if (kernel1_size() % n_query != 0 || kernel2_size() % n_query != 0) {
      throw ConfigError("DecoderConfig: kernel sizes " + std::to_string(kernel1_size()) +
                        " and " + std::to_string(kernel2_size()) +
                        " must both divide evenly by n_query=" + std::to_string(n_query));
    }
  }
};

struct LinearParams {
  Matrix weight;
  std::vector<double> bias;
};

struct DecoderParams {
  LinearParams proj_img;   // [d_llm x c_dec]
  LinearParams proj_ker1;  // [d_llm x chunk1]
  LinearParams proj_ker2;  // [d_llm x chunk2]
  std::vector<double> ln_gamma;
  std::vector<double> ln_beta;

  /// Zero-initialized parameters with the shapes the config dictates.
  static DecoderParams zeros(const DecoderConfig& cfg) {
    cfg.validate();
    DecoderParams p;
    p.proj_img = {Matrix(cfg.d_llm, cfg.c_dec), std::vector<double>(cfg.c_dec, 0.0)};
    p.proj_ker1 = {Matrix(cfg.d_llm, cfg.chunk1()), std::vector<double>(cfg.chunk1(), 0.0)};
    p.proj_ker2 = {Matrix(cfg.d_llm, cfg.chunk2()), std::vector<double>(cfg.chunk2(), 0.0)};
    p.ln_gamma.assign(cfg.c_dec, 0.0);
    p.ln_beta.assign(cfg.c_dec, 0.0);
    return p;
  }

  void validate_against(const DecoderConfig& cfg) const {
    auto check = [](bool ok, const std::string& field) {
      if (!ok) throw DimensionError("DecoderParams: " + field + " shape mismatch vs config");
    };
    check(proj_img.weight.rows == cfg.d_llm && proj_img.weight.cols == cfg.c_dec &&
              proj_img.bias.size() == cfg.c_dec,
          "proj_img");
    check(proj_ker1.weight.rows == cfg.d_llm && proj_ker1.weight.cols == cfg.chunk1() &&
              proj_ker1.bias.size() == cfg.chunk1(),
          "proj_ker1");
    check(proj_ker2.weight.rows == cfg.d_llm && proj_ker2.weight.cols == cfg.chunk2() &&
              proj_ker2.bias.size() == cfg.chunk2(),
          "proj_ker2");
    check(ln_gamma.size() == cfg.c_dec && ln_beta.size() == cfg.c_dec, "ln affine");
  }
};

/// Projects the N query rows through the stage's linear map and concatenates
/// the resulting chunks, in row order, into one flat kernel. Stage 1 reshapes
/// to [C, C, 2, 2], stage 2 to [C, 1, 2, 2]; the flat order is [in][out][kh][kw],
/// so chunk boundaries land on that order.
inline KernelTensor assemble_kernels(const Matrix& f_q, const DecoderParams& params,
                                     int stage, const DecoderConfig& cfg) {
  cfg.validate();
  if (stage != 1 && stage != 2) {
    throw ConfigError("assemble_kernels: stage must be 1 or 2");
  }
  if (f_q.rows != cfg.n_query) {
    throw DimensionError("assemble_kernels: query matrix has " + std::to_string(f_q.rows) +
                         " rows, expected n_query=" + std::to_string(cfg.n_query));
  }
  const LinearParams& proj = (stage == 1) ? params.proj_ker1 : params.proj_ker2;
  const Matrix chunks = linear_forward(f_q, proj.weight, proj.bias);
  // Row-major matrix data is already the row-order concatenation.
  KernelTensor k(cfg.c_dec, (stage == 1) ? cfg.c_dec : 1);
  k.data = chunks.data;
  return k;
}

/// Forward activations kept for the backward pass.
struct DecoderActivations {
  Matrix f_proj;    // projected image features, [L x C]
  FeatureMap h0;    // reshaped spatial map, [C x h_vis x w_vis]
  KernelTensor k1;  // stage-1 dynamic kernel
  FeatureMap h1;    // after first deconv
  FeatureMap h1n;   // after LayerNorm
  KernelTensor k2;  // stage-2 dynamic kernel
  FeatureMap h2;    // after second deconv, [1 x 4h x 4w]
  MaskLogits logits;
};

namespace detail {

inline void check_decode_inputs(const Matrix& f_img, const Matrix& f_q,
                                const DecoderParams& params, const DecoderConfig& cfg) {
  cfg.validate();
  params.validate_against(cfg);
  if (f_img.rows != cfg.vis_tokens()) {
    throw DimensionError("decode_mask: f_img has " + std::to_string(f_img.rows) +
                         " rows, expected h_vis*w_vis=" + std::to_string(cfg.vis_tokens()));
  }
  if (f_img.cols != cfg.d_llm) {
    throw DimensionError("decode_mask: f_img has " + std::to_string(f_img.cols) +
                         " cols, expected d_llm=" + std::to_string(cfg.d_llm));
  }
  if (f_q.rows != cfg.n_query) {
    throw DimensionError("decode_mask: f_q has " + std::to_string(f_q.rows) +
                         " rows, expected n_query=" + std::to_string(cfg.n_query));
  }
  if (f_q.cols != cfg.d_llm) {
    throw DimensionError("decode_mask: f_q has " + std::to_string(f_q.cols) +
                         " cols, expected d_llm=" + std::to_string(cfg.d_llm));
  }
}

}  // namespace detail

inline DecoderActivations decode_mask_fwd(const Matrix& f_img, const Matrix& f_q,
                                          const DecoderParams& params,
                                          const DecoderConfig& cfg) {
  detail::check_decode_inputs(f_img, f_q, params, cfg);
  DecoderActivations act;
  act.f_proj = linear_forward(f_img, params.proj_img.weight, params.proj_img.bias);
  // H0[c, i, j] = f_proj[i*w_vis + j, c]
  act.h0 = FeatureMap(cfg.c_dec, cfg.h_vis, cfg.w_vis);
  for (std::size_t i = 0; i < cfg.h_vis; ++i) {
    for (std::size_t j = 0; j < cfg.w_vis; ++j) {
      for (std::size_t c = 0; c < cfg.c_dec; ++c) {
        act.h0.at(c, i, j) = act.f_proj.at(i * cfg.w_vis + j, c);
      }
    }
  }
  act.k1 = assemble_kernels(f_q, params, 1, cfg);
  act.h1 = deconv2x_forward(act.h0, act.k1);
  act.h1n = layernorm_forward(act.h1, params.ln_gamma, params.ln_beta, cfg.eps);
  act.k2 = assemble_kernels(f_q, params, 2, cfg);
  act.h2 = deconv2x_forward(act.h1n, act.k2);
  const FeatureMap resized = bilinear_upsample(act.h2, cfg.h_out, cfg.w_out);
  act.logits = MaskLogits(cfg.h_out, cfg.w_out);
  act.logits.data = resized.data;
  return act;
}

inline MaskLogits decode_mask(const Matrix& f_img, const Matrix& f_q,
                              const DecoderParams& params, const DecoderConfig& cfg) {
  return decode_mask_fwd(f_img, f_q, params, cfg).logits;
}

struct DecoderGrads {
  Matrix d_f_img;
  Matrix d_f_q;
  DecoderParams d_params;
};

/// Exact reverse-mode gradient of decode_mask. The query features reach the
/// output only through the two kernels, so both kernel-projection paths feed
/// d_f_q.
inline DecoderGrads decode_mask_vjp(const Matrix& f_img, const Matrix& f_q,
                                    const DecoderParams& params, const DecoderConfig& cfg,
                                    const DecoderActivations& act,
                                    const MaskLogits& upstream) {
  detail::check_decode_inputs(f_img, f_q, params, cfg);
  if (upstream.height != cfg.h_out || upstream.width != cfg.w_out) {
    throw DimensionError("decode_mask_vjp: upstream gradient is " +
                         std::to_string(upstream.height) + "x" + std::to_string(upstream.width) +
                         ", expected " + std::to_string(cfg.h_out) + "x" +
                         std::to_string(cfg.w_out));
  }
  DecoderGrads g;
  g.d_params = DecoderParams::zeros(cfg);

  FeatureMap d_logits(1, cfg.h_out, cfg.w_out);
  d_logits.data = upstream.data;
  const FeatureMap d_h2 = bilinear_upsample_vjp(act.h2, d_logits);

  const Deconv2xGrads stage2 = deconv2x_vjp(act.h1n, act.k2, d_h2);
  const LayerNormGrads ln = layernorm_vjp(act.h1, params.ln_gamma, stage2.d_input, cfg.eps);
  g.d_params.ln_gamma = ln.d_gamma;
  g.d_params.ln_beta = ln.d_beta;
  const Deconv2xGrads stage1 = deconv2x_vjp(act.h0, act.k1, ln.d_x);

  // Reshape transpose: d_f_proj[i*w + j, c] = d_h0[c, i, j]
  Matrix d_f_proj(cfg.vis_tokens(), cfg.c_dec);
  for (std::size_t i = 0; i < cfg.h_vis; ++i) {
    for (std::size_t j = 0; j < cfg.w_vis; ++j) {
      for (std::size_t c = 0; c < cfg.c_dec; ++c) {
        d_f_proj.at(i * cfg.w_vis + j, c) = stage1.d_input.at(c, i, j);
      }
    }
  }
  const LinearGrads img = linear_vjp(f_img, params.proj_img.weight, d_f_proj);
  g.d_f_img = img.d_x;
  g.d_params.proj_img.weight = img.d_w;
  g.d_params.proj_img.bias = img.d_b;

  // Kernel gradients flow back through the per-query chunk projections.
  Matrix d_chunks1(cfg.n_query, cfg.chunk1());
  d_chunks1.data = stage1.d_kernel.data;
  const LinearGrads ker1 = linear_vjp(f_q, params.proj_ker1.weight, d_chunks1);
  g.d_params.proj_ker1.weight = ker1.d_w;
  g.d_params.proj_ker1.bias = ker1.d_b;

  Matrix d_chunks2(cfg.n_query, cfg.chunk2());
  d_chunks2.data = stage2.d_kernel.data;
  const LinearGrads ker2 = linear_vjp(f_q, params.proj_ker2.weight, d_chunks2);
  g.d_params.proj_ker2.weight = ker2.d_w;
  g.d_params.proj_ker2.bias = ker2.d_b;

  g.d_f_q = Matrix(cfg.n_query, cfg.d_llm);
  for (std::size_t i = 0; i < g.d_f_q.data.size(); ++i) {
    g.d_f_q.data[i] = ker1.d_x.data[i] + ker2.d_x.data[i];
  }
  return g;
}

/// pixel = 1 iff sigmoid(logit) >= threshold (so the default 0.5 keeps
/// logit == 0 as foreground).
inline BinaryMask binarize(const MaskLogits& logits, double threshold = 0.5) {
  BinaryMask mask(logits.height, logits.width);
  for (std::size_t i = 0; i < logits.size(); ++i) {
    mask.data[i] = sigmoid(logits.data[i]) >= threshold ? 1 : 0;
  }
  return mask;
}

}  // namespace umvl

#endif  // UMVL_DECODER_HPP_
