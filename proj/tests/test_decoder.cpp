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

#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <vector>

#include "umvl/decoder.hpp"
#include "umvl/decoder_io.hpp"
#include "umvl/grad_check.hpp"
#include "umvl/gradcheck_suite.hpp"
#include "umvl/tensor.hpp"

using namespace umvl;

namespace {

std::vector<double> random_vec(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 0.5);
  std::vector<double> v(n);
  for (double& x : v) x = gauss(rng);
  return v;
}

Matrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng) {
  Matrix m(r, c);
  m.data = random_vec(m.data.size(), rng);
  return m;
}

DecoderParams random_params(const DecoderConfig& cfg, std::mt19937_64& rng) {
  DecoderParams p = DecoderParams::zeros(cfg);
  p.proj_img.weight = random_matrix(cfg.d_llm, cfg.c_dec, rng);
  p.proj_img.bias = random_vec(cfg.c_dec, rng);
  p.proj_ker1.weight = random_matrix(cfg.d_llm, cfg.chunk1(), rng);
  p.proj_ker1.bias = random_vec(cfg.chunk1(), rng);
  p.proj_ker2.weight = random_matrix(cfg.d_llm, cfg.chunk2(), rng);
  p.proj_ker2.bias = random_vec(cfg.chunk2(), rng);
  p.ln_gamma = random_vec(cfg.c_dec, rng);
  p.ln_beta = random_vec(cfg.c_dec, rng);
  return p;
}

DecoderConfig small_config() {
  DecoderConfig cfg;
  cfg.d_llm = 6;
  cfg.c_dec = 4;
  cfg.n_query = 4;
  cfg.h_vis = 3;
  cfg.w_vis = 2;
  cfg.h_out = 10;
  cfg.w_out = 9;
  return cfg;
}

}  // namespace

TEST_CASE("zero parameters decode to all-zero logits", "[decoder]") {
  const DecoderConfig cfg = small_config();
  const DecoderParams params = DecoderParams::zeros(cfg);
  std::mt19937_64 rng(1);
  const Matrix f_img = random_matrix(cfg.vis_tokens(), cfg.d_llm, rng);
  const Matrix f_q = random_matrix(cfg.n_query, cfg.d_llm, rng);
  const MaskLogits logits = decode_mask(f_img, f_q, params, cfg);
  REQUIRE(logits.height == cfg.h_out);
  REQUIRE(logits.width == cfg.w_out);
  for (double v : logits.data) CHECK(v == 0.0);
}

TEST_CASE("decoder stage shapes follow the 4x spatial expansion", "[decoder]") {
  DecoderConfig cfg = small_config();
  cfg.h_vis = 6;
  cfg.w_vis = 6;
  cfg.h_out = 96;
  cfg.w_out = 96;
  std::mt19937_64 rng(2);
  const DecoderParams params = random_params(cfg, rng);
  const Matrix f_img = random_matrix(cfg.vis_tokens(), cfg.d_llm, rng);
  const Matrix f_q = random_matrix(cfg.n_query, cfg.d_llm, rng);
  const DecoderActivations act = decode_mask_fwd(f_img, f_q, params, cfg);
  CHECK(act.h0.channels == cfg.c_dec);
  CHECK(act.h0.height == 6);
  CHECK(act.h0.width == 6);
  CHECK(act.h1.channels == cfg.c_dec);
  CHECK(act.h1.height == 12);
  CHECK(act.h1.width == 12);
  CHECK(act.h2.channels == 1);
  CHECK(act.h2.height == 24);
  CHECK(act.h2.width == 24);
  CHECK(act.logits.height == 96);
  CHECK(act.logits.width == 96);
}

TEST_CASE("reference configuration produces a 1x32x32 pre-resize map", "[decoder]") {
  DecoderConfig cfg;
  cfg.d_llm = 8;  // small hidden size keeps the projection cheap
  cfg.c_dec = 128;
  cfg.n_query = 16;
  cfg.h_vis = 8;
  cfg.w_vis = 8;
  cfg.h_out = 200;
  cfg.w_out = 120;
  std::mt19937_64 rng(3);
  const DecoderParams params = random_params(cfg, rng);
  const Matrix f_img = random_matrix(cfg.vis_tokens(), cfg.d_llm, rng);
  const Matrix f_q = random_matrix(cfg.n_query, cfg.d_llm, rng);
  const DecoderActivations act = decode_mask_fwd(f_img, f_q, params, cfg);
  CHECK(act.h2.channels == 1);
  CHECK(act.h2.height == 32);
  CHECK(act.h2.width == 32);
  CHECK(act.logits.height == 200);
  CHECK(act.logits.width == 120);
}

TEST_CASE("token grid reshape maps row-major tokens to spatial sites", "[decoder]") {
  DecoderConfig cfg = small_config();
  std::mt19937_64 rng(4);
  DecoderParams params = DecoderParams::zeros(cfg);
  // Identity-like projection: c_dec <= d_llm, weight picks the first c_dec dims.
  for (std::size_t c = 0; c < cfg.c_dec; ++c) params.proj_img.weight.at(c, c) = 1.0;
  const Matrix f_img = random_matrix(cfg.vis_tokens(), cfg.d_llm, rng);
  const Matrix f_q = random_matrix(cfg.n_query, cfg.d_llm, rng);
  const DecoderActivations act = decode_mask_fwd(f_img, f_q, params, cfg);
  for (std::size_t i = 0; i < cfg.h_vis; ++i) {
    for (std::size_t j = 0; j < cfg.w_vis; ++j) {
      for (std::size_t c = 0; c < cfg.c_dec; ++c) {
        CHECK(act.h0.at(c, i, j) == f_img.at(i * cfg.w_vis + j, c));
      }
    }
  }
}

TEST_CASE("kernel assembly concatenates per-query chunks in row order", "[decoder][kernels]") {
  DecoderConfig cfg;
  cfg.d_llm = 5;
  cfg.c_dec = 4;
  cfg.n_query = 4;
  cfg.h_vis = 2;
  cfg.w_vis = 2;
  cfg.h_out = 16;
  cfg.w_out = 16;
  std::mt19937_64 rng(5);
  const DecoderParams params = random_params(cfg, rng);
  const Matrix f_q = random_matrix(cfg.n_query, cfg.d_llm, rng);

  for (int stage = 1; stage <= 2; ++stage) {
    const LinearParams& proj = (stage == 1) ? params.proj_ker1 : params.proj_ker2;
    const std::size_t chunk = (stage == 1) ? cfg.chunk1() : cfg.chunk2();
    // By-hand reference: project each query row separately, then concatenate.
    std::vector<double> flat;
    for (std::size_t q = 0; q < cfg.n_query; ++q) {
      for (std::size_t j = 0; j < chunk; ++j) {
        double acc = proj.bias[j];
        for (std::size_t d = 0; d < cfg.d_llm; ++d) acc += f_q.at(q, d) * proj.weight.at(d, j);
        flat.push_back(acc);
      }
    }
    const KernelTensor k = assemble_kernels(f_q, params, stage, cfg);
    const std::size_t out_ch = (stage == 1) ? cfg.c_dec : 1;
    REQUIRE(k.in_channels == cfg.c_dec);
    REQUIRE(k.out_channels == out_ch);
    REQUIRE(flat.size() == k.data.size());
    // Flat order must equal the [in][out][kh][kw] layout exactly.
    for (std::size_t i = 0; i < flat.size(); ++i) {
      CAPTURE(stage, i);
      CHECK(k.data[i] == Catch::Approx(flat[i]).margin(1e-12));
    }
  }
}

TEST_CASE("a single query emits the whole kernel", "[decoder][kernels]") {
  DecoderConfig cfg;
  cfg.d_llm = 3;
  cfg.c_dec = 2;
  cfg.n_query = 1;
  cfg.h_vis = 2;
  cfg.w_vis = 2;
  cfg.h_out = 8;
  cfg.w_out = 8;
  std::mt19937_64 rng(6);
  const DecoderParams params = random_params(cfg, rng);
  const Matrix f_q = random_matrix(1, cfg.d_llm, rng);
  const KernelTensor k = assemble_kernels(f_q, params, 1, cfg);
  const Matrix row = linear_forward(f_q, params.proj_ker1.weight, params.proj_ker1.bias);
  REQUIRE(row.data.size() == k.data.size());
  for (std::size_t i = 0; i < k.data.size(); ++i) CHECK(k.data[i] == row.data[i]);
}

TEST_CASE("permuting distinct query rows changes the assembled kernel", "[decoder][kernels]") {
  DecoderConfig cfg;
  cfg.d_llm = 4;
  cfg.c_dec = 4;
  cfg.n_query = 2;
  cfg.h_vis = 2;
  cfg.w_vis = 2;
  cfg.h_out = 8;
  cfg.w_out = 8;
  std::mt19937_64 rng(7);
  const DecoderParams params = random_params(cfg, rng);
  Matrix f_q = random_matrix(2, cfg.d_llm, rng);
  Matrix swapped = f_q;
  for (std::size_t d = 0; d < cfg.d_llm; ++d) {
    std::swap(swapped.at(0, d), swapped.at(1, d));
  }
  const KernelTensor a = assemble_kernels(f_q, params, 1, cfg);
  const KernelTensor b = assemble_kernels(swapped, params, 1, cfg);
  CHECK(a.data != b.data);

  // Identical rows are permutation invariant.
  for (std::size_t d = 0; d < cfg.d_llm; ++d) f_q.at(1, d) = f_q.at(0, d);
  const KernelTensor c = assemble_kernels(f_q, params, 1, cfg);
  Matrix same = f_q;
  for (std::size_t d = 0; d < cfg.d_llm; ++d) std::swap(same.at(0, d), same.at(1, d));
  const KernelTensor d = assemble_kernels(same, params, 1, cfg);
  CHECK(c.data == d.data);
}

TEST_CASE("end-to-end decoder gradient matches finite differences", "[decoder][grad]") {
  DecoderConfig cfg;
  cfg.d_llm = 8;
  cfg.c_dec = 8;
  cfg.n_query = 4;
  cfg.h_vis = 4;
  cfg.w_vis = 4;
  cfg.h_out = 32;
  cfg.w_out = 32;
  const FlatDecodeProblem prob = make_decode_problem(cfg, 99);
  const GradCheckResult res = grad_check(
      [&](const std::vector<double>& t) { return prob.value(t); },
      [&](const std::vector<double>& t) { return prob.grad(t); }, prob.theta0);
  CAPTURE(res.worst_index, res.worst_analytic, res.worst_numeric);
  CHECK(res.max_rel_error < 1e-4);
}

TEST_CASE("binarize thresholds sigmoid probability at one half", "[decoder]") {
  MaskLogits logits(1, 3);
  logits.data = {10.0, -10.0, 0.0};
  const BinaryMask mask = binarize(logits);
  CHECK(mask.data[0] == 1);
  CHECK(mask.data[1] == 0);
  CHECK(mask.data[2] == 1);  // p = 0.5 meets the >= 0.5 threshold

  const BinaryMask strict = binarize(logits, 0.9);
  CHECK(strict.data[0] == 1);
  CHECK(strict.data[1] == 0);
  CHECK(strict.data[2] == 0);
}

TEST_CASE("parameter files round-trip bitwise", "[decoder][io]") {
  const DecoderConfig cfg = small_config();
  std::mt19937_64 rng(8);
  const DecoderParams params = random_params(cfg, rng);
  const std::filesystem::path dir = std::filesystem::temp_directory_path() / "umvl_dec_io";
  std::filesystem::create_directories(dir);
  const std::filesystem::path bin = dir / "params.bin";
  const std::filesystem::path json = dir / "params.json";
  save_decoder_params(params, bin, json);
  const DecoderParams loaded = load_decoder_params(json, cfg);
  CHECK(loaded.proj_img.weight.data == params.proj_img.weight.data);
  CHECK(loaded.proj_img.bias == params.proj_img.bias);
  CHECK(loaded.proj_ker1.weight.data == params.proj_ker1.weight.data);
  CHECK(loaded.proj_ker1.bias == params.proj_ker1.bias);
  CHECK(loaded.proj_ker2.weight.data == params.proj_ker2.weight.data);
  CHECK(loaded.proj_ker2.bias == params.proj_ker2.bias);
  CHECK(loaded.ln_gamma == params.ln_gamma);
  CHECK(loaded.ln_beta == params.ln_beta);

  SECTION("corrupted magic is rejected") {
    std::fstream f(bin, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(0);
    f.put('X');
    f.close();
    CHECK_THROWS_AS(load_decoder_params(json, cfg), FormatError);
  }

  SECTION("mismatched config is rejected") {
    DecoderConfig other = cfg;
    other.c_dec = 8;
    other.n_query = 8;
    CHECK_THROWS_AS(load_decoder_params(json, other), FormatError);
  }

  std::filesystem::remove_all(dir);
}

TEST_CASE("feature files round-trip bitwise", "[decoder][io]") {
  const DecoderConfig cfg = small_config();
  std::mt19937_64 rng(9);
  DecoderFeatures feats;
  feats.f_img = random_matrix(cfg.vis_tokens(), cfg.d_llm, rng);
  feats.f_q = random_matrix(cfg.n_query, cfg.d_llm, rng);
  const std::filesystem::path path =
      std::filesystem::temp_directory_path() / "umvl_feats_roundtrip.json";
  save_decoder_features(feats, path);
  const DecoderFeatures loaded = load_decoder_features(path);
  CHECK(loaded.f_img.rows == feats.f_img.rows);
  CHECK(loaded.f_img.cols == feats.f_img.cols);
  CHECK(loaded.f_img.data == feats.f_img.data);
  CHECK(loaded.f_q.data == feats.f_q.data);
  std::filesystem::remove(path);
}

TEST_CASE("invalid configurations are rejected", "[decoder][errors]") {
  DecoderConfig cfg = small_config();
  cfg.c_dec = 5;
  cfg.n_query = 8;  // 4 * 5 * 5 = 100 is not divisible by 8
  CHECK_THROWS_AS(cfg.validate(), ConfigError);

  DecoderConfig zero = small_config();
  zero.d_llm = 0;
  CHECK_THROWS_AS(zero.validate(), ConfigError);

  DecoderConfig flat = small_config();
  flat.h_out = 0;
  CHECK_THROWS_AS(flat.validate(), ConfigError);
}

TEST_CASE("decode rejects mismatched feature shapes", "[decoder][errors]") {
  const DecoderConfig cfg = small_config();
  const DecoderParams params = DecoderParams::zeros(cfg);
  std::mt19937_64 rng(10);
  const Matrix good_img = random_matrix(cfg.vis_tokens(), cfg.d_llm, rng);
  const Matrix good_q = random_matrix(cfg.n_query, cfg.d_llm, rng);
  CHECK_THROWS_AS(
      decode_mask(random_matrix(cfg.vis_tokens() + 1, cfg.d_llm, rng), good_q, params, cfg),
      DimensionError);
  CHECK_THROWS_AS(
      decode_mask(good_img, random_matrix(cfg.n_query, cfg.d_llm + 2, rng), params, cfg),
      DimensionError);
  CHECK_THROWS_AS(assemble_kernels(good_q, params, 3, cfg), ConfigError);
}

TEST_CASE("decoding is deterministic", "[decoder]") {
  const DecoderConfig cfg = small_config();
  std::mt19937_64 rng(12);
  const DecoderParams params = random_params(cfg, rng);
  const Matrix f_img = random_matrix(cfg.vis_tokens(), cfg.d_llm, rng);
  const Matrix f_q = random_matrix(cfg.n_query, cfg.d_llm, rng);
  const MaskLogits a = decode_mask(f_img, f_q, params, cfg);
  const MaskLogits b = decode_mask(f_img, f_q, params, cfg);
  REQUIRE(a.data == b.data);
}
