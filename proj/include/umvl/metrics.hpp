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
// Metric primitives: mask and box IoU, greedy detection matching, and the
// best-F1 threshold sweep.

#ifndef UMVL_METRICS_HPP_
#define UMVL_METRICS_HPP_

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "umvl/errors.hpp"
#include "umvl/tensor.hpp"

namespace umvl {

struct RectF {
  double x1 = 0.0, y1 = 0.0, x2 = 0.0, y2 = 0.0;
  friend bool operator==(const RectF&, const RectF&) = default;
};

/// |a AND b| / |a OR b|; two empty masks agree perfectly and score 1.0.
inline double iou_masks(const BinaryMask& a, const BinaryMask& b) {
  if (a.height != b.height || a.width != b.width) {
    throw DimensionError("iou_masks: shapes " + std::to_string(a.height) + "x" +
                         std::to_string(a.width) + " and " + std::to_string(b.height) + "x" +
                         std::to_string(b.width) + " differ");
  }
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const bool pa = a.data[i] != 0;
    const bool pb = b.data[i] != 0;
    inter += (pa && pb) ? 1 : 0;
    uni += (pa || pb) ? 1 : 0;
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

/// Continuous-geometry IoU; 0 when the union has no area.
inline double iou_boxes(const RectF& a, const RectF& b) {
  if (a.x1 > a.x2 || a.y1 > a.y2 || b.x1 > b.x2 || b.y1 > b.y2) {
    throw RangeError("iou_boxes: rectangle corners must satisfy x1 <= x2 and y1 <= y2");
  }
  const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  const double inter = (iw > 0.0 && ih > 0.0) ? iw * ih : 0.0;
  const double area_a = (a.x2 - a.x1) * (a.y2 - a.y1);
  const double area_b = (b.x2 - b.x1) * (b.y2 - b.y1);
  const double uni = area_a + area_b - inter;
  if (uni <= 0.0) return 0.0;
  return inter / uni;
}

struct MatchResult {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (pred index, gt index)
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
};

/// Greedy one-to-one matching: candidate pairs with IoU >= iou_thresh are
/// visited by IoU descending, ties by (pred index, gt index) ascending, and
/// accepted iff both sides are still free.
inline MatchResult match_detections(const std::vector<RectF>& preds,
                                    const std::vector<RectF>& gts, double iou_thresh) {
  if (!(iou_thresh > 0.0) || iou_thresh > 1.0) {
    throw RangeError("match_detections: iou_thresh must be in (0, 1]");
  }
  struct Candidate {
    double iou;
    std::size_t pred, gt;
  };
  std::vector<Candidate> candidates;
  for (std::size_t p = 0; p < preds.size(); ++p) {
    for (std::size_t g = 0; g < gts.size(); ++g) {
      const double iou = iou_boxes(preds[p], gts[g]);
      if (iou >= iou_thresh) candidates.push_back({iou, p, g});
    }
  }
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    if (a.iou != b.iou) return a.iou > b.iou;
    if (a.pred != b.pred) return a.pred < b.pred;
    return a.gt < b.gt;
  });
  std::vector<bool> pred_used(preds.size(), false), gt_used(gts.size(), false);
  MatchResult result;
  for (const Candidate& c : candidates) {
    if (pred_used[c.pred] || gt_used[c.gt]) continue;
    pred_used[c.pred] = true;
    gt_used[c.gt] = true;
    result.pairs.emplace_back(c.pred, c.gt);
  }
  result.tp = result.pairs.size();
  result.fp = preds.size() - result.tp;
  result.fn = gts.size() - result.tp;
  return result;
}

struct PrfValues {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Precision, recall, F1 as fractions; each defined 0 when its denominator
/// vanishes (so an empty sweep scores 0, not NaN).
inline PrfValues prf_from_counts(std::size_t tp, std::size_t fp, std::size_t fn) {
  PrfValues v;
  if (tp + fp > 0) v.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  if (tp + fn > 0) v.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  if (v.precision + v.recall > 0.0) {
    v.f1 = 2.0 * v.precision * v.recall / (v.precision + v.recall);
  }
  return v;
}

struct ScoredBox {
  RectF box;
  double score = 0.0;
};

/// One image's detections and ground truth for the scored protocol.
struct DetectionImage {
  std::vector<ScoredBox> preds;
  std::vector<RectF> gts;
};

struct SweepResult {
  double best_f1 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double threshold = std::numeric_limits<double>::infinity();
};

/// Sweeps score thresholds over the distinct prediction scores plus +inf,
/// keeping predictions with score >= threshold, matching per image, and
/// pooling counts corpus-wide. Returns the F1 maximizer; ties go to the
/// higher threshold.
inline SweepResult best_f1_sweep(const std::vector<DetectionImage>& images,
                                 double iou_thresh = 0.5) {
  std::set<double> thresholds;
  for (const DetectionImage& img : images) {
    for (const ScoredBox& sb : img.preds) {
      if (!std::isfinite(sb.score)) {
        throw FormatError("best_f1_sweep: every prediction needs a finite score");
      }
      thresholds.insert(sb.score);
    }
  }
  thresholds.insert(std::numeric_limits<double>::infinity());

  SweepResult best;
  bool first = true;
  for (double t : thresholds) {  // ascending, so >= on ties prefers higher t
    std::size_t tp = 0, fp = 0, fn = 0;
    for (const DetectionImage& img : images) {
      std::vector<RectF> kept;
      for (const ScoredBox& sb : img.preds) {
        if (sb.score >= t) kept.push_back(sb.box);
      }
      const MatchResult m = match_detections(kept, img.gts, iou_thresh);
      tp += m.tp;
      fp += m.fp;
      fn += m.fn;
    }
    const PrfValues v = prf_from_counts(tp, fp, fn);
    if (first || v.f1 >= best.best_f1) {
      best = {v.f1, v.precision, v.recall, t};
      first = false;
    }
  }
  return best;
}

}  // namespace umvl

#endif  // UMVL_METRICS_HPP_
