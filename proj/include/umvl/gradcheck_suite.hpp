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
// End-to-end gradient verification: the whole decode + loss pipeline as a
// scalar function of one flat vector holding both feature matrices and every
// parameter, checked against central finite differences over randomized
// small configurations.

#ifndef UMVL_GRADCHECK_SUITE_HPP_
#define UMVL_GRADCHECK_SUITE_HPP_

#include <cstdint>
#include <random>
#include <vector>

#include "umvl/decoder.hpp"
#include "umvl/grad_check.hpp"
#include "umvl/losses.hpp"
#include "umvl/tensor.hpp"

namespace umvl {

/// decode_mask + combined_seg_loss against a fixed target, with f_img, f_q,
/// and all decoder parameters packed into one flat vector (in that order,
/// params in serialization field order).
struct FlatDecodeProblem {
  DecoderConfig cfg;
  BinaryMask target;
  std::vector<double> theta0;

  std::size_t theta_size() const {
    return cfg.vis_tokens() * cfg.d_llm + cfg.n_query * cfg.d_llm +
           cfg.d_llm * cfg.c_dec + cfg.c_dec + cfg.d_llm * cfg.chunk1() + cfg.chunk1() +
           cfg.d_llm * cfg.chunk2() + cfg.chunk2() + 2 * cfg.c_dec;
  }

  void unpack(const std::vector<double>& theta, Matrix& f_img, Matrix& f_q,
              DecoderParams& params) const {
    std::size_t pos = 0;
    auto take = [&](std::vector<double>& dst) {
      std::copy(theta.begin() + static_cast<std::ptrdiff_t>(pos),
                theta.begin() + static_cast<std::ptrdiff_t>(pos + dst.size()), dst.begin());
      pos += dst.size();
    };
    f_img = Matrix(cfg.vis_tokens(), cfg.d_llm);
    take(f_img.data);
    f_q = Matrix(cfg.n_query, cfg.d_llm);
    take(f_q.data);
    params = DecoderParams::zeros(cfg);
    take(params.proj_img.weight.data);
    take(params.proj_img.bias);
    take(params.proj_ker1.weight.data);
    take(params.proj_ker1.bias);
    take(params.proj_ker2.weight.data);
    take(params.proj_ker2.bias);
    take(params.ln_gamma);
    take(params.ln_beta);
  }

  double value(const std::vector<double>& theta) const {
    Matrix f_img, f_q;
    DecoderParams params;
    unpack(theta, f_img, f_q, params);
    const MaskLogits logits = decode_mask(f_img, f_q, params, cfg);
    return combined_seg_loss(logits, target).loss;
  }

  std::vector<double> grad(const std::vector<double>& theta) const {
    Matrix f_img, f_q;
    DecoderParams params;
    unpack(theta, f_img, f_q, params);
    const DecoderActivations act = decode_mask_fwd(f_img, f_q, params, cfg);
    const LossResult loss = combined_seg_loss(act.logits, target);
    MaskLogits upstream(cfg.h_out, cfg.w_out);
    upstream.data = loss.grad;
    const DecoderGrads g = decode_mask_vjp(f_img, f_q, params, cfg, act, upstream);

    std::vector<double> out;
    out.reserve(theta.size());
    auto put = [&](const std::vector<double>& src) {
      out.insert(out.end(), src.begin(), src.end());
    };
    put(g.d_f_img.data);
    put(g.d_f_q.data);
    put(g.d_params.proj_img.weight.data);
    put(g.d_params.proj_img.bias);
    put(g.d_params.proj_ker1.weight.data);
    put(g.d_params.proj_ker1.bias);
    put(g.d_params.proj_ker2.weight.data);
    put(g.d_params.proj_ker2.bias);
    put(g.d_params.ln_gamma);
    put(g.d_params.ln_beta);
    return out;
  }
};

/// Random near-unit-gain starting point and random binary target for a
/// given config.
inline FlatDecodeProblem make_decode_problem(const DecoderConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  FlatDecodeProblem prob;
  prob.cfg = cfg;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);
  prob.target = BinaryMask(cfg.h_out, cfg.w_out);
  for (auto& px : prob.target.data) px = coin(rng) ? 1 : 0;
  prob.theta0.resize(prob.theta_size());
  for (double& x : prob.theta0) x = 0.1 * gauss(rng);
  // Shift the ln_gamma block to its unit base so the normalization has gain.
  const std::size_t gamma_begin = prob.theta_size() - 2 * cfg.c_dec;
  for (std::size_t i = 0; i < cfg.c_dec; ++i) prob.theta0[gamma_begin + i] += 1.0;
  return prob;
}

struct GradSuiteCase {
  DecoderConfig cfg;
  GradCheckResult result;
};

/// Draws a random config with D, C in [4,16], N in {2,4,8} (respecting the
/// chunk divisibility rule), visual grid up to 6x6, and small outputs.
inline DecoderConfig random_small_config(std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> d_dist(4, 16);
  std::uniform_int_distribution<std::size_t> grid_dist(1, 6);
  std::uniform_int_distribution<std::size_t> out_dist(3, 12);
  std::uniform_int_distribution<int> n_pick(0, 2);
  DecoderConfig cfg;
  cfg.n_query = std::size_t{1} << (n_pick(rng) + 1);  // 2, 4, or 8
  do {
    cfg.c_dec = d_dist(rng);
  } while ((cfg.c_dec * cfg.c_dec * 4) % cfg.n_query != 0 ||
           (cfg.c_dec * 4) % cfg.n_query != 0);
  cfg.d_llm = d_dist(rng);
  cfg.h_vis = grid_dist(rng);
  cfg.w_vis = grid_dist(rng);
  cfg.h_out = out_dist(rng);
  cfg.w_out = out_dist(rng);
  return cfg;
}

/// Runs `trials` end-to-end checks with fresh random configs; every
/// parameter and both feature inputs are probed.
inline std::vector<GradSuiteCase> run_gradcheck_suite(std::uint64_t seed, std::size_t trials,
                                                      double eps = 1e-5) {
  std::mt19937_64 rng(seed);
  std::vector<GradSuiteCase> cases;
  for (std::size_t t = 0; t < trials; ++t) {
    const DecoderConfig cfg = random_small_config(rng);
    const FlatDecodeProblem prob = make_decode_problem(cfg, rng());
    const GradCheckResult r =
        grad_check([&](const std::vector<double>& x) { return prob.value(x); },
                   [&](const std::vector<double>& x) { return prob.grad(x); }, prob.theta0, eps);
    cases.push_back({cfg, r});
  }
  return cases;
}

}  // namespace umvl

#endif  // UMVL_GRADCHECK_SUITE_HPP_
