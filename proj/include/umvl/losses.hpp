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
// Segmentation supervision: soft-dice region overlap plus pixelwise binary
// cross entropy, combined with configurable weights. Gradients with respect
// to the logits are analytic.

#ifndef UMVL_LOSSES_HPP_
#define UMVL_LOSSES_HPP_

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "umvl/errors.hpp"
#include "umvl/tensor.hpp"

namespace umvl {

struct LossConfig {
  double weight_dice = 1.0;
  double weight_bce = 1.0;
  double dice_smooth = 1.0;

  void validate() const {
    if (weight_dice < 0.0 || weight_bce < 0.0) {
      throw ConfigError("LossConfig: loss weights must be >= 0");
    }
    if (weight_dice + weight_bce <= 0.0) {
      throw ConfigError("LossConfig: weight_dice + weight_bce must be > 0");
    }
    if (dice_smooth <= 0.0) {
      throw ConfigError("LossConfig: dice_smooth must be > 0");
    }
  }
};

struct LossResult {
  double loss = 0.0;
  std::vector<double> grad;  // d loss / d logit, same layout as the logits
};

namespace detail {
inline void check_loss_shapes(const MaskLogits& logits, const BinaryMask& target,
                              const char* op) {
  if (logits.height != target.height || logits.width != target.width) {
    throw DimensionError(std::string(op) + ": logits " + std::to_string(logits.height) +
                         "x" + std::to_string(logits.width) + " vs target " +
                         std::to_string(target.height) + "x" + std::to_string(target.width));
  }
}
}  // namespace detail

/// Soft-dice coefficient of sigmoid(logits) against a 0/1 target:
///   (2 * sum(p*t) + smooth) / (sum(p) + sum(t) + smooth)
inline double soft_dice(const MaskLogits& logits, const BinaryMask& target,
                        double smooth = 1.0) {
  detail::check_loss_shapes(logits, target, "soft_dice");
  double inter = 0.0, p_sum = 0.0, t_sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double p = sigmoid(logits.data[i]);
    const double t = static_cast<double>(target.data[i]);
    inter += p * t;
    p_sum += p;
    t_sum += t;
  }
  return (2.0 * inter + smooth) / (p_sum + t_sum + smooth);
}

/// loss = 1 - soft_dice. Global-sum form keeps the magnitude stable across
/// resolutions; the smoothing constant guards the empty-target 0/0.
inline LossResult dice_loss(const MaskLogits& logits, const BinaryMask& target,
                            double smooth = 1.0) {
  detail::check_loss_shapes(logits, target, "dice_loss");
  const std::size_t n = logits.size();
  std::vector<double> p(n);
  double inter = 0.0, p_sum = 0.0, t_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    p[i] = sigmoid(logits.data[i]);
    const double t = static_cast<double>(target.data[i]);
    inter += p[i] * t;
    p_sum += p[i];
    t_sum += t;
  }
  const double num = 2.0 * inter + smooth;
  const double den = p_sum + t_sum + smooth;
  LossResult r;
  r.loss = 1.0 - num / den;
  r.grad.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(target.data[i]);
    // d loss / d p_i = (num - 2 t den) / den^2, then chain through sigmoid.
    r.grad[i] = (num - 2.0 * t * den) / (den * den) * p[i] * (1.0 - p[i]);
  }
  return r;
}

/// Mean pixelwise binary cross entropy in the overflow-safe form
///   max(z, 0) - z*t + log(1 + exp(-|z|)).
inline LossResult bce_loss(const MaskLogits& logits, const BinaryMask& target) {
  detail::check_loss_shapes(logits, target, "bce_loss");
  const std::size_t n = logits.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  LossResult r;
  r.grad.resize(n);
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double z = logits.data[i];
    const double t = static_cast<double>(target.data[i]);
    acc += std::max(z, 0.0) - z * t + std::log1p(std::exp(-std::abs(z)));
    r.grad[i] = (sigmoid(z) - t) * inv_n;
  }
  r.loss = acc * inv_n;
  return r;
}

/// weight_dice * dice + weight_bce * bce, gradients summed accordingly.
inline LossResult combined_seg_loss(const MaskLogits& logits, const BinaryMask& target,
                                    const LossConfig& cfg = {}) {
  cfg.validate();
  detail::check_loss_shapes(logits, target, "combined_seg_loss");
  const LossResult dice = dice_loss(logits, target, cfg.dice_smooth);
  const LossResult bce = bce_loss(logits, target);
  LossResult r;
  r.loss = cfg.weight_dice * dice.loss + cfg.weight_bce * bce.loss;
  r.grad.resize(logits.size());
  for (std::size_t i = 0; i < r.grad.size(); ++i) {
    r.grad[i] = cfg.weight_dice * dice.grad[i] + cfg.weight_bce * bce.grad[i];
  }
  return r;
}

}  // namespace umvl

#endif  // UMVL_LOSSES_HPP_
