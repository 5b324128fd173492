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
// Annotation corpora: one JSON object per line describing an image and its
// labeled targets (mask, box, keypoints, score, diagnosis). Loading
// validates geometry against the image bounds, rejects duplicate ids and
// duplicate keypoint names, and reports unknown fields as warnings.

#ifndef UMVL_ANNOTATIONS_HPP_
#define UMVL_ANNOTATIONS_HPP_

#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "umvl/errors.hpp"
#include "umvl/metrics.hpp"
#include "umvl/rle.hpp"

namespace umvl {

struct KeypointAnno {
  std::string name;
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const KeypointAnno&, const KeypointAnno&) = default;
};

struct TargetAnno {
  std::string label;
  std::optional<RleMask> mask;
  std::optional<RectF> box;
  std::vector<KeypointAnno> keypoints;
  std::optional<double> score;
  std::optional<std::string> diagnosis;
  friend bool operator==(const TargetAnno&, const TargetAnno&) = default;
};

struct AnnotationRecord {
  std::string image_id;
  std::size_t width = 0;   // image extent in pixels
  std::size_t height = 0;
  std::string site;        // anatomical site, the per-site reporting key
  std::vector<TargetAnno> targets;
  friend bool operator==(const AnnotationRecord&, const AnnotationRecord&) = default;
};

struct CorpusLoadResult {
  std::vector<AnnotationRecord> records;
  std::vector<std::string> warnings;
};

namespace detail {

inline void warn_unknown_keys(const nlohmann::json& obj, std::initializer_list<const char*> known,
                              const std::string& where, std::vector<std::string>& warnings) {
  for (const auto& item : obj.items()) {
    bool found = false;
    for (const char* k : known) {
      if (item.key() == k) {
        found = true;
        break;
      }
    }
    if (!found) {
      warnings.push_back(where + ": unknown field '" + item.key() + "' ignored");
    }
  }
}

inline double require_coord(const nlohmann::json& v, double lo, double hi,
                            const std::string& where) {
  if (!v.is_number()) throw FormatError(where + ": expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x) || x < lo || x > hi) {
    throw FormatError(where + ": coordinate " + std::to_string(x) + " outside [" +
                      std::to_string(lo) + ", " + std::to_string(hi) + "]");
  }
  return x;
}

inline TargetAnno parse_target(const nlohmann::json& j, const AnnotationRecord& rec,
                               const std::string& where, std::vector<std::string>& warnings) {
  if (!j.is_object()) throw FormatError(where + ": target must be an object");
  warn_unknown_keys(j, {"label", "mask", "box", "keypoints", "score", "diagnosis"}, where,
                    warnings);
  TargetAnno t;
  t.label = j.value("label", std::string{});
  const double w = static_cast<double>(rec.width);
  const double h = static_cast<double>(rec.height);

  if (j.contains("mask")) {
    const nlohmann::json& jm = j["mask"];
    if (!jm.is_object()) throw FormatError(where + ".mask: must be an object");
    warn_unknown_keys(jm, {"height", "width", "counts"}, where + ".mask", warnings);
    RleMask m;
    try {
      m.height = jm.at("height").get<std::size_t>();
      m.width = jm.at("width").get<std::size_t>();
      m.counts = jm.at("counts").get<std::vector<std::size_t>>();
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(where + ".mask: " + e.what());
    }
    if (m.height != rec.height || m.width != rec.width) {
      throw FormatError(where + ".mask: mask is " + std::to_string(m.height) + "x" +
                        std::to_string(m.width) + " but the image is " +
                        std::to_string(rec.height) + "x" + std::to_string(rec.width));
    }
    std::size_t total = 0;
    for (std::size_t c : m.counts) total += c;
    if (total != m.height * m.width) {
      throw FormatError(where + ".mask: counts sum to " + std::to_string(total) +
                        ", expected " + std::to_string(m.height * m.width));
    }
    t.mask = std::move(m);
  }

  if (j.contains("box")) {
    const nlohmann::json& jb = j["box"];
    if (!jb.is_array() || jb.size() != 4) {
      throw FormatError(where + ".box: expected [x1, y1, x2, y2]");
    }
    RectF r;
    r.x1 = require_coord(jb[0], 0.0, w, where + ".box");
    r.y1 = require_coord(jb[1], 0.0, h, where + ".box");
    r.x2 = require_coord(jb[2], 0.0, w, where + ".box");
    r.y2 = require_coord(jb[3], 0.0, h, where + ".box");
    if (r.x1 > r.x2 || r.y1 > r.y2) {
      throw FormatError(where + ".box: corners must satisfy x1 <= x2 and y1 <= y2");
    }
    t.box = r;
  }

  if (j.contains("keypoints")) {
    const nlohmann::json& jk = j["keypoints"];
    if (!jk.is_array()) throw FormatError(where + ".keypoints: expected an array");
    std::set<std::string> names;
    for (std::size_t i = 0; i < jk.size(); ++i) {
      const std::string kwhere = where + ".keypoints[" + std::to_string(i) + "]";
      if (!jk[i].is_object()) throw FormatError(kwhere + ": expected an object");
      warn_unknown_keys(jk[i], {"name", "x", "y"}, kwhere, warnings);
      KeypointAnno kp;
      try {
        kp.name = jk[i].at("name").get<std::string>();
      } catch (const nlohmann::json::exception& e) {
        throw FormatError(kwhere + ": " + e.what());
      }
      if (kp.name.empty()) throw FormatError(kwhere + ": keypoint name must be nonempty");
      if (!names.insert(kp.name).second) {
        throw FormatError(kwhere + ": duplicate keypoint name '" + kp.name + "'");
      }
      if (!jk[i].contains("x") || !jk[i].contains("y")) {
        throw FormatError(kwhere + ": needs x and y");
      }
      kp.x = require_coord(jk[i]["x"], 0.0, w, kwhere);
      kp.y = require_coord(jk[i]["y"], 0.0, h, kwhere);
      t.keypoints.push_back(std::move(kp));
    }
  }

  if (j.contains("score")) {
    if (!j["score"].is_number() || !std::isfinite(j["score"].get<double>())) {
      throw FormatError(where + ".score: must be a finite number");
    }
    t.score = j["score"].get<double>();
  }

  if (j.contains("diagnosis")) {
    if (!j["diagnosis"].is_string()) throw FormatError(where + ".diagnosis: must be a string");
    t.diagnosis = j["diagnosis"].get<std::string>();
  }
  return t;
}

}  // namespace detail

inline AnnotationRecord annotation_record_from_json(const nlohmann::json& j,
                                                    const std::string& where,
                                                    std::vector<std::string>& warnings) {
  if (!j.is_object()) throw FormatError(where + ": record must be a JSON object");
  detail::warn_unknown_keys(j, {"image_id", "width", "height", "site", "targets"}, where,
                            warnings);
  AnnotationRecord rec;
  try {
    rec.image_id = j.at("image_id").get<std::string>();
    rec.width = j.at("width").get<std::size_t>();
    rec.height = j.at("height").get<std::size_t>();
    rec.site = j.at("site").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(where + ": " + e.what());
  }
  if (rec.image_id.empty()) throw FormatError(where + ": image_id must be nonempty");
  if (rec.width < 1 || rec.height < 1) {
    throw FormatError(where + ": image dimensions must be >= 1");
  }
  if (rec.site.empty()) throw FormatError(where + ": site must be nonempty");
  const nlohmann::json targets = j.value("targets", nlohmann::json::array());
  if (!targets.is_array()) throw FormatError(where + ".targets: expected an array");
  for (std::size_t i = 0; i < targets.size(); ++i) {
    rec.targets.push_back(detail::parse_target(
        targets[i], rec, where + ".targets[" + std::to_string(i) + "]", warnings));
  }
  return rec;
}

inline nlohmann::json annotation_record_to_json(const AnnotationRecord& rec) {
  nlohmann::json j;
  j["image_id"] = rec.image_id;
  j["width"] = rec.width;
  j["height"] = rec.height;
  j["site"] = rec.site;
  j["targets"] = nlohmann::json::array();
  for (const TargetAnno& t : rec.targets) {
    nlohmann::json jt;
    jt["label"] = t.label;
    if (t.mask) {
      jt["mask"] = {{"height", t.mask->height}, {"width", t.mask->width},
                    {"counts", t.mask->counts}};
    }
    if (t.box) jt["box"] = {t.box->x1, t.box->y1, t.box->x2, t.box->y2};
    if (!t.keypoints.empty()) {
      jt["keypoints"] = nlohmann::json::array();
      for (const KeypointAnno& kp : t.keypoints) {
        jt["keypoints"].push_back({{"name", kp.name}, {"x", kp.x}, {"y", kp.y}});
      }
    }
    if (t.score) jt["score"] = *t.score;
    if (t.diagnosis) jt["diagnosis"] = *t.diagnosis;
    j["targets"].push_back(jt);
  }
  return j;
}

/// Parses a JSONL corpus. Blank lines are skipped; structural problems throw
/// FormatError naming the line; unknown fields only accumulate warnings.
inline CorpusLoadResult parse_annotations(std::istream& in, const std::string& source_name) {
  CorpusLoadResult out;
  std::set<std::string> seen_ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = source_name + ":" + std::to_string(line_no);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(where + ": " + e.what());
    }
    AnnotationRecord rec = annotation_record_from_json(j, where, out.warnings);
    if (!seen_ids.insert(rec.image_id).second) {
      throw FormatError(where + ": duplicate image_id '" + rec.image_id + "'");
    }
    out.records.push_back(std::move(rec));
  }
  return out;
}

inline CorpusLoadResult load_annotations(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  return parse_annotations(in, path.filename().string());
}

inline void save_annotations(const std::vector<AnnotationRecord>& records,
                             const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  for (const AnnotationRecord& rec : records) {
    out << annotation_record_to_json(rec).dump() << "\n";
  }
  if (!out) throw IoError("write failure on " + path.string());
}

}  // namespace umvl

#endif  // UMVL_ANNOTATIONS_HPP_
