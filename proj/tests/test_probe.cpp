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

#include <cstddef>
#include <vector>

#include "umvl/probe.hpp"

using namespace umvl;

namespace {

DecoderConfig probe_config(std::size_t out = 64) {
  DecoderConfig cfg;
  cfg.d_llm = 32;
  cfg.c_dec = 32;
  cfg.n_query = 8;
  cfg.h_vis = 8;
  cfg.w_vis = 8;
  cfg.h_out = out;
  cfg.w_out = out;
  return cfg;
}

}  // namespace

TEST_CASE("the disk target is centered and plausible in size", "[probe]") {
  const BinaryMask disk = make_disk_target(64, 64);
  std::size_t fg = 0;
  for (auto v : disk.data) fg += v;
  // Radius 16 disk: roughly pi * 256 pixels of 4096 total.
  CHECK(fg > 700);
  CHECK(fg < 900);
  CHECK(disk.data[31 * 64 + 31] == 1);  // center is foreground
  CHECK(disk.data[0] == 0);             // corner is background
  // Symmetric about the center in both axes.
  for (std::size_t y = 0; y < 64; ++y) {
    for (std::size_t x = 0; x < 64; ++x) {
      CHECK(disk.data[y * 64 + x] == disk.data[(63 - y) * 64 + (63 - x)]);
    }
  }
}

TEST_CASE("probe state initialization is seeded and shaped by the config", "[probe]") {
  const DecoderConfig cfg = probe_config();
  const ProbeState a = init_probe_state(cfg, 7);
  const ProbeState b = init_probe_state(cfg, 7);
  CHECK(a.f_img.data == b.f_img.data);
  CHECK(a.f_q.data == b.f_q.data);
  CHECK(a.params.proj_ker1.weight.data == b.params.proj_ker1.weight.data);
  CHECK(a.params.ln_gamma == b.params.ln_gamma);

  const ProbeState c = init_probe_state(cfg, 8);
  CHECK(a.f_img.data != c.f_img.data);

  CHECK(a.f_img.rows == cfg.vis_tokens());
  CHECK(a.f_img.cols == cfg.d_llm);
  CHECK(a.f_q.rows == cfg.n_query);

  // Scale gates stay near one so normalized activations pass through.
  for (double g : a.params.ln_gamma) {
    CHECK(g > 0.4);
    CHECK(g < 1.6);
  }
}

TEST_CASE("gradient descent reduces the loss on a disk target", "[probe]") {
  const DecoderConfig cfg = probe_config();
  const BinaryMask target = make_disk_target(cfg.h_out, cfg.w_out);
  std::vector<double> losses;
  const ProbeResult r = overfit_probe(target, cfg, 60, 0.05, 7,
                                      [&](std::size_t, double loss, double) {
                                        losses.push_back(loss);
                                      });
  REQUIRE(losses.size() == 60);
  CHECK(r.final_loss < losses.front() * 0.5);
  CHECK(r.final_dice > 0.7);
  CHECK(r.logits.height == cfg.h_out);
  CHECK(r.logits.width == cfg.w_out);
}

TEST_CASE("identical seeds give bitwise identical probe runs", "[probe][determinism]") {
  const DecoderConfig cfg = probe_config();
  const BinaryMask target = make_disk_target(cfg.h_out, cfg.w_out);
  const ProbeResult a = overfit_probe(target, cfg, 15, 0.05, 7);
  const ProbeResult b = overfit_probe(target, cfg, 15, 0.05, 7);
  CHECK(a.final_loss == b.final_loss);
  CHECK(a.final_dice == b.final_dice);
  CHECK(a.logits.data == b.logits.data);
}

TEST_CASE("an all-background target is learned almost perfectly", "[probe]") {
  const DecoderConfig cfg = probe_config();
  const BinaryMask empty(cfg.h_out, cfg.w_out);
  const ProbeResult r = overfit_probe(empty, cfg, 120, 0.05, 3);
  CHECK(r.final_dice > 0.99);
}

TEST_CASE("probe arguments are validated", "[probe][errors]") {
  const DecoderConfig cfg = probe_config();
  const BinaryMask target = make_disk_target(cfg.h_out, cfg.w_out);
  CHECK_THROWS_AS(overfit_probe(target, cfg, 0, 0.05, 7), ConfigError);
  CHECK_THROWS_AS(overfit_probe(target, cfg, 10, 0.0, 7), ConfigError);
  CHECK_THROWS_AS(overfit_probe(target, cfg, 10, -1.0, 7), ConfigError);
  const BinaryMask wrong(cfg.h_out + 1, cfg.w_out);
  CHECK_THROWS_AS(overfit_probe(wrong, cfg, 10, 0.05, 7), DimensionError);
}
