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
// Corpus-level evaluation: segmentation mIoU, detection P/R/F1 and best F1,
// keypoint mean distance error, and diagnosis accuracy, each reported per
// anatomical site with a support-weighted overall value. Records are
// processed in sorted image_id order so results never depend on input order.

#ifndef UMVL_EVAL_HPP_
#define UMVL_EVAL_HPP_

#include <cctype>
#include <cmath>
#include <iomanip>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "umvl/annotations.hpp"
#include "umvl/errors.hpp"
#include "umvl/metrics.hpp"
#include "umvl/rle.hpp"

namespace umvl {

enum class EvalTask { segmentation, detection, keypoint, diagnosis };

inline std::string_view eval_task_name(EvalTask task) {
  switch (task) {
    case EvalTask::segmentation: return "segmentation";
    case EvalTask::detection: return "detection";
    case EvalTask::keypoint: return "keypoint";
    case EvalTask::diagnosis: return "diagnosis";
  }
  return "unknown";
}

struct MetricReport {
  EvalTask task = EvalTask::segmentation;
  std::map<std::string, double> per_site;
  std::map<std::string, std::size_t> support_counts;
  double overall = 0.0;
  // Detection only: corpus-pooled values and the operating thresholds.
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> f1;
  std::optional<double> iou_thresh;
  std::optional<double> score_threshold;  // set only in best-F1 mode; may be +inf
  // Keypoints only: images excluded because a named point was missing.
  std::map<std::string, std::size_t> incomplete;

  std::string_view metric_name() const {
    switch (task) {
      case EvalTask::segmentation: return "mIoU (%)";
      case EvalTask::detection: return score_threshold ? "Best F1 (%)" : "F1 (%)";
      case EvalTask::keypoint: return "MDE (px)";
      case EvalTask::diagnosis: return "accuracy (%)";
    }
    return "value";
  }
};

namespace detail {

inline std::map<std::string, const AnnotationRecord*> index_records(
    const std::vector<AnnotationRecord>& records, const std::string& corpus) {
  std::map<std::string, const AnnotationRecord*> out;
  for (const AnnotationRecord& r : records) {
    if (!out.emplace(r.image_id, &r).second) {
      throw FormatError(corpus + " corpus: duplicate image_id '" + r.image_id + "'");
    }
  }
  return out;
}

inline void require_pred_ids_known(const std::map<std::string, const AnnotationRecord*>& preds,
                                   const std::map<std::string, const AnnotationRecord*>& gts) {
  for (const auto& [id, rec] : preds) {
    (void)rec;
    if (gts.find(id) == gts.end()) {
      throw FormatError("prediction corpus: image_id '" + id + "' has no ground-truth record");
    }
  }
}

struct SiteAcc {
  double sum = 0.0;
  std::size_t count = 0;
};

/// per_site = scale * sum / count; overall = scale * total_sum / total_count,
/// which coincides with the support-weighted recombination of per-site values.
inline void fill_averages(const std::map<std::string, SiteAcc>& acc, double scale,
                          MetricReport& report) {
  double total_sum = 0.0;
  std::size_t total_count = 0;
  for (const auto& [site, a] : acc) {
    if (a.count == 0) continue;
    report.per_site[site] = scale * a.sum / static_cast<double>(a.count);
    report.support_counts[site] = a.count;
    total_sum += a.sum;
    total_count += a.count;
  }
  report.overall = total_count > 0 ? scale * total_sum / static_cast<double>(total_count) : 0.0;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Segmentation

/// Foreground IoU per (image, target) pair against the first prediction
/// target with the same label; pairs with no such masked prediction score 0.
/// Macro-average within site, support-weighted overall, in percent.
inline MetricReport eval_segmentation(const std::vector<AnnotationRecord>& preds,
                                      const std::vector<AnnotationRecord>& gts) {
  const auto pmap = detail::index_records(preds, "prediction");
  const auto gmap = detail::index_records(gts, "ground-truth");
  detail::require_pred_ids_known(pmap, gmap);

  std::map<std::string, detail::SiteAcc> acc;
  for (const auto& [id, gtr] : gmap) {
    const auto pit = pmap.find(id);
    const AnnotationRecord* pr = pit == pmap.end() ? nullptr : pit->second;
    for (const TargetAnno& gt : gtr->targets) {
      if (!gt.mask) {
        throw FormatError("ground-truth image '" + id + "': segmentation target '" + gt.label +
                          "' has no mask");
      }
      const BinaryMask gt_mask = rle_decode(*gt.mask);
      double iou = 0.0;
      if (pr) {
        for (const TargetAnno& pt : pr->targets) {
          if (pt.label != gt.label) continue;
          if (pt.mask) iou = iou_masks(rle_decode(*pt.mask), gt_mask);
          break;  // first label match decides
        }
      }
      detail::SiteAcc& a = acc[gtr->site];
      a.sum += iou;
      a.count += 1;
    }
  }
  MetricReport report;
  report.task = EvalTask::segmentation;
  detail::fill_averages(acc, 100.0, report);
  return report;
}

// ---------------------------------------------------------------------------
// Detection

/// Fixed-threshold mode scores every prediction; best-F1 mode requires
/// scores and sweeps thresholds per site and corpus-wide. per_site carries
/// F1 (fixed) or best F1 (sweep) in percent; the pooled precision/recall/f1
/// fields describe the whole corpus and, in sweep mode, the score_threshold
/// of the pooled maximizer.
inline MetricReport eval_detection(const std::vector<AnnotationRecord>& preds,
                                   const std::vector<AnnotationRecord>& gts,
                                   double iou_thresh = 0.5, bool use_best_f1 = false) {
  if (!(iou_thresh > 0.0) || iou_thresh > 1.0) {
    throw RangeError("eval_detection: iou_thresh must be in (0, 1]");
  }
  const auto pmap = detail::index_records(preds, "prediction");
  const auto gmap = detail::index_records(gts, "ground-truth");
  detail::require_pred_ids_known(pmap, gmap);

  std::map<std::string, std::vector<DetectionImage>> by_site;
  std::map<std::string, std::size_t> gt_support;
  for (const auto& [id, gtr] : gmap) {
    DetectionImage img;
    for (const TargetAnno& t : gtr->targets) {
      if (t.box) img.gts.push_back(*t.box);
    }
    const auto pit = pmap.find(id);
    if (pit != pmap.end()) {
      for (const TargetAnno& t : pit->second->targets) {
        if (!t.box) continue;
        if (use_best_f1 && !t.score) {
          throw FormatError("prediction image '" + id +
                            "': box without a score (required for best-F1)");
        }
        img.preds.push_back({*t.box, t.score.value_or(0.0)});
      }
    }
    gt_support[gtr->site] += img.gts.size();
    by_site[gtr->site].push_back(std::move(img));
  }

  MetricReport report;
  report.task = EvalTask::detection;
  report.iou_thresh = iou_thresh;

  std::vector<DetectionImage> pooled;
  for (const auto& [site, images] : by_site) {
    double site_value = 0.0;
    if (use_best_f1) {
      site_value = best_f1_sweep(images, iou_thresh).best_f1;
    } else {
      std::size_t tp = 0, fp = 0, fn = 0;
      for (const DetectionImage& img : images) {
        std::vector<RectF> boxes;
        for (const ScoredBox& sb : img.preds) boxes.push_back(sb.box);
        const MatchResult m = match_detections(boxes, img.gts, iou_thresh);
        tp += m.tp;
        fp += m.fp;
        fn += m.fn;
      }
      site_value = prf_from_counts(tp, fp, fn).f1;
    }
    report.per_site[site] = 100.0 * site_value;
    report.support_counts[site] = gt_support[site];
    pooled.insert(pooled.end(), images.begin(), images.end());
  }

  if (use_best_f1) {
    const SweepResult sweep = best_f1_sweep(pooled, iou_thresh);
    report.precision = 100.0 * sweep.precision;
    report.recall = 100.0 * sweep.recall;
    report.f1 = 100.0 * sweep.best_f1;
    report.score_threshold = sweep.threshold;
  } else {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (const DetectionImage& img : pooled) {
      std::vector<RectF> boxes;
      for (const ScoredBox& sb : img.preds) boxes.push_back(sb.box);
      const MatchResult m = match_detections(boxes, img.gts, iou_thresh);
      tp += m.tp;
      fp += m.fp;
      fn += m.fn;
    }
    const PrfValues v = prf_from_counts(tp, fp, fn);
    report.precision = 100.0 * v.precision;
    report.recall = 100.0 * v.recall;
    report.f1 = 100.0 * v.f1;
  }

  double weighted = 0.0;
  std::size_t total_support = 0;
  for (const auto& [site, value] : report.per_site) {
    weighted += value * static_cast<double>(report.support_counts[site]);
    total_support += report.support_counts[site];
  }
  report.overall = total_support > 0 ? weighted / static_cast<double>(total_support) : 0.0;
  return report;
}

// ---------------------------------------------------------------------------
// Keypoints

namespace detail {

inline std::map<std::string, std::pair<double, double>> gather_keypoints(
    const AnnotationRecord& rec, const std::string& corpus) {
  std::map<std::string, std::pair<double, double>> out;
  for (const TargetAnno& t : rec.targets) {
    for (const KeypointAnno& kp : t.keypoints) {
      if (!out.emplace(kp.name, std::make_pair(kp.x, kp.y)).second) {
        throw FormatError(corpus + " image '" + rec.image_id + "': keypoint name '" + kp.name +
                          "' appears in more than one target");
      }
    }
  }
  return out;
}

}  // namespace detail

/// Mean Euclidean distance over name-matched keypoints, averaged per image
/// and then over images within a site. Images with any missing named point
/// are excluded from the mean and tallied in `incomplete`.
inline MetricReport eval_keypoints(const std::vector<AnnotationRecord>& preds,
                                   const std::vector<AnnotationRecord>& gts) {
  const auto pmap = detail::index_records(preds, "prediction");
  const auto gmap = detail::index_records(gts, "ground-truth");
  detail::require_pred_ids_known(pmap, gmap);

  MetricReport report;
  report.task = EvalTask::keypoint;
  std::map<std::string, detail::SiteAcc> acc;
  for (const auto& [id, gtr] : gmap) {
    const auto gt_points = detail::gather_keypoints(*gtr, "ground-truth");
    if (gt_points.empty()) continue;
    std::map<std::string, std::pair<double, double>> pred_points;
    const auto pit = pmap.find(id);
    if (pit != pmap.end()) pred_points = detail::gather_keypoints(*pit->second, "prediction");

    double total = 0.0;
    bool complete = true;
    for (const auto& [name, gp] : gt_points) {
      const auto pp = pred_points.find(name);
      if (pp == pred_points.end()) {
        complete = false;
        break;
      }
      total += std::hypot(pp->second.first - gp.first, pp->second.second - gp.second);
    }
    if (!complete) {
      report.incomplete[gtr->site] += 1;
      continue;
    }
    detail::SiteAcc& a = acc[gtr->site];
    a.sum += total / static_cast<double>(gt_points.size());
    a.count += 1;
  }
  detail::fill_averages(acc, 1.0, report);
  return report;
}

// ---------------------------------------------------------------------------
// Diagnosis

/// ASCII lowercase plus whitespace trim; the matching rule is exact after
/// this, so hedged wording never scores.
inline std::string normalize_diagnosis(std::string_view text) {
  std::size_t begin = 0, end = text.size();
  auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
  while (begin < end && is_space(text[begin])) ++begin;
  while (end > begin && is_space(text[end - 1])) --end;
  std::string out(text.substr(begin, end - begin));
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

/// Binary benign/malignant accuracy in percent. A missing prediction record
/// or diagnosis-free prediction counts as wrong.
inline MetricReport eval_diagnosis(const std::vector<AnnotationRecord>& preds,
                                   const std::vector<AnnotationRecord>& gts) {
  const auto pmap = detail::index_records(preds, "prediction");
  const auto gmap = detail::index_records(gts, "ground-truth");
  detail::require_pred_ids_known(pmap, gmap);

  std::map<std::string, detail::SiteAcc> acc;
  for (const auto& [id, gtr] : gmap) {
    std::optional<std::string> gt_dx;
    for (const TargetAnno& t : gtr->targets) {
      if (t.diagnosis) {
        gt_dx = t.diagnosis;
        break;
      }
    }
    if (!gt_dx) {
      throw FormatError("ground-truth image '" + id + "': no target carries a diagnosis");
    }
    const std::string truth = normalize_diagnosis(*gt_dx);
    if (truth != "benign" && truth != "malignant") {
      throw FormatError("ground-truth image '" + id + "': diagnosis '" + *gt_dx +
                        "' is not benign or malignant");
    }
    std::string pred_text;
    const auto pit = pmap.find(id);
    if (pit != pmap.end()) {
      for (const TargetAnno& t : pit->second->targets) {
        if (t.diagnosis) {
          pred_text = *t.diagnosis;
          break;
        }
      }
    }
    detail::SiteAcc& a = acc[gtr->site];
    a.sum += (normalize_diagnosis(pred_text) == truth) ? 1.0 : 0.0;
    a.count += 1;
  }
  MetricReport report;
  report.task = EvalTask::diagnosis;
  detail::fill_averages(acc, 100.0, report);
  return report;
}

// ---------------------------------------------------------------------------
// Report output

inline nlohmann::json report_to_json(const MetricReport& report) {
  nlohmann::json j;
  j["task"] = std::string(eval_task_name(report.task));
  j["metric"] = std::string(report.metric_name());
  j["overall"] = report.overall;
  j["per_site"] = report.per_site;
  j["support_counts"] = report.support_counts;
  if (report.task == EvalTask::detection) {
    j["precision"] = report.precision.value_or(0.0);
    j["recall"] = report.recall.value_or(0.0);
    j["f1"] = report.f1.value_or(0.0);
    j["iou_thresh"] = report.iou_thresh.value_or(0.5);
    if (report.score_threshold) {
      if (std::isfinite(*report.score_threshold)) {
        j["score_threshold"] = *report.score_threshold;
      } else {
        j["score_threshold"] = "inf";  // JSON numbers cannot carry infinity
      }
    }
  }
  if (report.task == EvalTask::keypoint) {
    j["incomplete"] = report.incomplete;
  }
  return j;
}

/// Aligned plain-text table; percentages and pixel values with two decimals.
inline std::string report_to_table(const MetricReport& report) {
  std::set<std::string> sites;
  for (const auto& [site, v] : report.per_site) sites.insert(site);
  for (const auto& [site, v] : report.incomplete) sites.insert(site);
  std::size_t name_width = std::string("overall").size();
  for (const std::string& s : sites) name_width = std::max(name_width, s.size());

  std::ostringstream out;
  out << "task: " << eval_task_name(report.task) << "\n";
  out << "metric: " << report.metric_name() << "\n";
  out << std::left << std::setw(static_cast<int>(name_width) + 2) << "site" << std::right
      << std::setw(10) << "value" << std::setw(10) << "support";
  if (report.task == EvalTask::keypoint) out << std::setw(12) << "incomplete";
  out << "\n";

  auto value_str = [](double v) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(2) << v;
    return s.str();
  };
  auto row = [&](const std::string& name, const std::string& value, const std::string& support,
                 const std::string& inc) {
    out << std::left << std::setw(static_cast<int>(name_width) + 2) << name << std::right
        << std::setw(10) << value << std::setw(10) << support;
    if (report.task == EvalTask::keypoint) out << std::setw(12) << inc;
    out << "\n";
  };

  std::size_t total_support = 0;
  std::size_t total_incomplete = 0;
  for (const std::string& site : sites) {
    const auto pv = report.per_site.find(site);
    const auto sv = report.support_counts.find(site);
    const auto iv = report.incomplete.find(site);
    const std::size_t support = sv == report.support_counts.end() ? 0 : sv->second;
    const std::size_t inc = iv == report.incomplete.end() ? 0 : iv->second;
    total_support += support;
    total_incomplete += inc;
    row(site, pv == report.per_site.end() ? "-" : value_str(pv->second),
        std::to_string(support), std::to_string(inc));
  }
  row("overall", value_str(report.overall), std::to_string(total_support),
      std::to_string(total_incomplete));

  if (report.task == EvalTask::detection) {
    out << "pooled precision: " << value_str(report.precision.value_or(0.0)) << "\n";
    out << "pooled recall:    " << value_str(report.recall.value_or(0.0)) << "\n";
    out << "pooled f1:        " << value_str(report.f1.value_or(0.0)) << "\n";
    out << "iou threshold:    " << value_str(report.iou_thresh.value_or(0.5)) << "\n";
    if (report.score_threshold) {
      out << "score threshold:  "
          << (std::isfinite(*report.score_threshold) ? value_str(*report.score_threshold)
                                                     : std::string("inf"))
          << "\n";
    }
  }
  return out.str();
}

}  // namespace umvl

#endif  // UMVL_EVAL_HPP_
