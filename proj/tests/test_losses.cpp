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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "umvl/grad_check.hpp"
#include "umvl/losses.hpp"
#include "umvl/tensor.hpp"

using namespace umvl;

namespace {

struct Pair {
  MaskLogits logits;
  BinaryMask target;
};

Pair random_pair(std::size_t h, std::size_t w, std::uint64_t seed, double scale = 2.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(-scale, scale);
  std::bernoulli_distribution coin(0.5);
  Pair p{MaskLogits(h, w), BinaryMask(h, w)};
  for (double& z : p.logits.data) z = uni(rng);
  for (auto& t : p.target.data) t = coin(rng) ? 1 : 0;
  return p;
}

}  // namespace

TEST_CASE("cross entropy at zero logits equals ln 2 for any target", "[losses]") {
  for (std::uint8_t bit : {std::uint8_t{0}, std::uint8_t{1}}) {
    MaskLogits logits(4, 4);
    BinaryMask target(4, 4);
    std::fill(target.data.begin(), target.data.end(), bit);
    const LossResult r = bce_loss(logits, target);
    CHECK(r.loss == Catch::Approx(std::log(2.0)).margin(1e-15));
  }
}

TEST_CASE("saturated correct predictions drive both losses below 1e-6", "[losses]") {
  Pair p = random_pair(8, 8, 1);
  for (std::size_t i = 0; i < p.logits.size(); ++i) {
    p.logits.data[i] = p.target.data[i] ? 40.0 : -40.0;
  }
  CHECK(bce_loss(p.logits, p.target).loss < 1e-6);
  CHECK(dice_loss(p.logits, p.target).loss < 1e-6);
  CHECK(combined_seg_loss(p.logits, p.target).loss < 2e-6);

  // Saturated-correct on an all-background target as well.
  MaskLogits neg(8, 8);
  std::fill(neg.data.begin(), neg.data.end(), -40.0);
  BinaryMask empty(8, 8);
  CHECK(dice_loss(neg, empty).loss < 1e-6);
  CHECK(bce_loss(neg, empty).loss < 1e-6);
}

TEST_CASE("extreme logits stay finite", "[losses]") {
  MaskLogits logits(2, 2);
  logits.data = {1000.0, -1000.0, 1000.0, -1000.0};
  BinaryMask target(2, 2);
  target.data = {0, 1, 1, 0};
  const LossResult bce = bce_loss(logits, target);
  const LossResult dice = dice_loss(logits, target);
  CHECK(std::isfinite(bce.loss));
  CHECK(std::isfinite(dice.loss));
  for (double g : bce.grad) CHECK(std::isfinite(g));
  for (double g : dice.grad) CHECK(std::isfinite(g));
}

TEST_CASE("dice loss is one minus the soft dice coefficient", "[losses]") {
  const Pair p = random_pair(5, 7, 2);
  const double coeff = soft_dice(p.logits, p.target);
  const LossResult r = dice_loss(p.logits, p.target);
  CHECK(r.loss == Catch::Approx(1.0 - coeff).margin(1e-15));
}

TEST_CASE("loss gradients match finite differences", "[losses][grad]") {
  const Pair p = random_pair(4, 5, 3);
  const std::size_t n = p.logits.size();

  auto check_fn = [&](auto&& loss_fn) {
    auto value = [&](const std::vector<double>& theta) {
      MaskLogits z(p.logits.height, p.logits.width);
      z.data = theta;
      return loss_fn(z).loss;
    };
    auto grad = [&](const std::vector<double>& theta) {
      MaskLogits z(p.logits.height, p.logits.width);
      z.data = theta;
      return loss_fn(z).grad;
    };
    return grad_check(value, grad, p.logits.data);
  };

  CHECK(check_fn([&](const MaskLogits& z) { return dice_loss(z, p.target); }).max_rel_error <
        1e-6);
  CHECK(check_fn([&](const MaskLogits& z) { return bce_loss(z, p.target); }).max_rel_error <
        1e-6);
  LossConfig cfg;
  cfg.weight_dice = 0.7;
  cfg.weight_bce = 1.3;
  CHECK(check_fn([&](const MaskLogits& z) {
          return combined_seg_loss(z, p.target, cfg);
        }).max_rel_error < 1e-6);
  (void)n;
}

TEST_CASE("combined loss is the exact weighted sum of its parts", "[losses]") {
  const Pair p = random_pair(6, 6, 4);
  LossConfig cfg;
  cfg.weight_dice = 0.25;
  cfg.weight_bce = 2.0;
  const LossResult combined = combined_seg_loss(p.logits, p.target, cfg);
  const LossResult dice = dice_loss(p.logits, p.target, cfg.dice_smooth);
  const LossResult bce = bce_loss(p.logits, p.target);
  CHECK(std::abs(combined.loss - (cfg.weight_dice * dice.loss + cfg.weight_bce * bce.loss)) <
        1e-12);
  for (std::size_t i = 0; i < combined.grad.size(); ++i) {
    CHECK(std::abs(combined.grad[i] -
                   (cfg.weight_dice * dice.grad[i] + cfg.weight_bce * bce.grad[i])) < 1e-12);
  }
}

TEST_CASE("unit dice weight with zero bce weight reproduces dice exactly", "[losses]") {
  const Pair p = random_pair(3, 9, 5);
  LossConfig cfg;
  cfg.weight_dice = 1.0;
  cfg.weight_bce = 0.0;
  const LossResult combined = combined_seg_loss(p.logits, p.target, cfg);
  const LossResult dice = dice_loss(p.logits, p.target, cfg.dice_smooth);
  CHECK(combined.loss == dice.loss);
  CHECK(combined.grad == dice.grad);
}

TEST_CASE("losses are symmetric under pixel permutation", "[losses]") {
  const Pair p = random_pair(4, 4, 6);
  std::vector<std::size_t> perm(p.logits.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::mt19937_64 rng(7);
  std::shuffle(perm.begin(), perm.end(), rng);
  Pair q{MaskLogits(4, 4), BinaryMask(4, 4)};
  for (std::size_t i = 0; i < perm.size(); ++i) {
    q.logits.data[i] = p.logits.data[perm[i]];
    q.target.data[i] = p.target.data[perm[i]];
  }
  CHECK(std::abs(dice_loss(p.logits, p.target).loss - dice_loss(q.logits, q.target).loss) <
        1e-12);
  CHECK(std::abs(bce_loss(p.logits, p.target).loss - bce_loss(q.logits, q.target).loss) <
        1e-12);
}

TEST_CASE("loss configuration is validated", "[losses][errors]") {
  LossConfig negative;
  negative.weight_dice = -1.0;
  CHECK_THROWS_AS(negative.validate(), ConfigError);

  LossConfig zero;
  zero.weight_dice = 0.0;
  zero.weight_bce = 0.0;
  CHECK_THROWS_AS(zero.validate(), ConfigError);

  LossConfig smooth;
  smooth.dice_smooth = 0.0;
  CHECK_THROWS_AS(smooth.validate(), ConfigError);

  const Pair p = random_pair(2, 2, 8);
  CHECK_THROWS_AS(combined_seg_loss(p.logits, p.target, zero), ConfigError);
}

TEST_CASE("mismatched shapes are rejected", "[losses][errors]") {
  MaskLogits logits(2, 3);
  BinaryMask target(3, 2);
  CHECK_THROWS_AS(dice_loss(logits, target), DimensionError);
  CHECK_THROWS_AS(bce_loss(logits, target), DimensionError);
  CHECK_THROWS_AS(combined_seg_loss(logits, target), DimensionError);
  CHECK_THROWS_AS(soft_dice(logits, target), DimensionError);
}
