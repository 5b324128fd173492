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
// Spatial-token codec: typed grounding primitives (boxes, points, lines,
// mask queries, object references), a coordinate quantizer, a serializer
// emitting the exact marker grammar, and a total parser that skips prose,
// recovers at the next marker after any malformed fragment, and reports
// every problem as a byte-addressed diagnostic.

#ifndef UMVL_GROUNDING_HPP_
#define UMVL_GROUNDING_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "umvl/errors.hpp"

namespace umvl {

// Marker literals; these are the wire format and must match byte for byte.
inline constexpr std::string_view kBoxStart = "<|box_start|>";
inline constexpr std::string_view kBoxEnd = "<|box_end|>";
inline constexpr std::string_view kPointStart = "<|point_start|>";
inline constexpr std::string_view kPointEnd = "<|point_end|>";
inline constexpr std::string_view kLineStart = "<|line_start|>";
inline constexpr std::string_view kLineEnd = "<|line_end|>";
inline constexpr std::string_view kSegMask = "<|seg_mask|>";
inline constexpr std::string_view kRefStart = "<|object_ref_start|>";
inline constexpr std::string_view kRefEnd = "<|object_ref_end|>";

struct Box {
  int x1 = 0, y1 = 0, x2 = 0, y2 = 0;
  friend bool operator==(const Box&, const Box&) = default;
};

struct Point {
  int x = 0, y = 0;
  friend bool operator==(const Point&, const Point&) = default;
};

// Lines keep their endpoint order; direction can be meaningful.
struct Line {
  int x1 = 0, y1 = 0, x2 = 0, y2 = 0;
  friend bool operator==(const Line&, const Line&) = default;
};

struct MaskQuery {
  std::size_t token_count = 0;
  friend bool operator==(const MaskQuery&, const MaskQuery&) = default;
};

struct Element;
using ElementList = std::vector<Element>;

/// A labeled reference whose body is the primitives that follow its closing
/// marker, up to the next reference or end of input.
struct ObjectRef {
  std::string label;
  ElementList body;
  friend bool operator==(const ObjectRef& a, const ObjectRef& b);
};

struct Element {
  using Value = std::variant<Box, Point, Line, MaskQuery, ObjectRef>;
  Value value;

  Element() = default;
  Element(Box v) : value(v) {}
  Element(Point v) : value(v) {}
  Element(Line v) : value(v) {}
  Element(MaskQuery v) : value(v) {}
  Element(ObjectRef v) : value(std::move(v)) {}

  template <typename T>
  bool is() const {
    return std::holds_alternative<T>(value);
  }
  template <typename T>
  const T& as() const {
    return std::get<T>(value);
  }

  friend bool operator==(const Element&, const Element&) = default;
};

inline bool operator==(const ObjectRef& a, const ObjectRef& b) {
  return a.label == b.label && a.body == b.body;
}

inline std::string kind_name(const Element& e) {
  struct Visitor {
    std::string operator()(const Box&) const { return "box"; }
    std::string operator()(const Point&) const { return "point"; }
    std::string operator()(const Line&) const { return "line"; }
    std::string operator()(const MaskQuery&) const { return "mask_query"; }
    std::string operator()(const ObjectRef&) const { return "object_ref"; }
  };
  return std::visit(Visitor{}, e.value);
}

// ---------------------------------------------------------------------------
// Coordinate quantization

struct Quantizer {
  std::size_t bins = 1000;
  double image_width = 0.0;
  double image_height = 0.0;

  void validate() const {
    if (bins < 2) throw ConfigError("Quantizer: bins must be >= 2");
    if (image_width < 1.0 || image_height < 1.0) {
      throw ConfigError("Quantizer: image dimensions must be >= 1");
    }
  }
};

/// bin = min(bins-1, floor(x / axis_size * bins)); x == axis_size clamps
/// into the last bin.
inline int quantize(double x, double axis_size, const Quantizer& q) {
  if (q.bins < 2) throw ConfigError("quantize: bins must be >= 2");
  if (!(axis_size > 0.0)) throw RangeError("quantize: axis_size must be > 0");
  if (!(x >= 0.0) || x > axis_size) {
    throw RangeError("quantize: x=" + std::to_string(x) + " outside [0, " +
                     std::to_string(axis_size) + "]");
  }
  const double scaled = std::floor(x / axis_size * static_cast<double>(q.bins));
  return static_cast<int>(std::min(scaled, static_cast<double>(q.bins - 1)));
}

/// Bin-center convention: x = (bin + 0.5) / bins * axis_size.
inline double dequantize(int bin, double axis_size, const Quantizer& q) {
  if (q.bins < 2) throw ConfigError("dequantize: bins must be >= 2");
  if (!(axis_size > 0.0)) throw RangeError("dequantize: axis_size must be > 0");
  if (bin < 0 || static_cast<std::size_t>(bin) >= q.bins) {
    throw RangeError("dequantize: bin " + std::to_string(bin) + " outside [0, " +
                     std::to_string(q.bins - 1) + "]");
  }
  return (static_cast<double>(bin) + 0.5) / static_cast<double>(q.bins) * axis_size;
}

// ---------------------------------------------------------------------------
// Serialization

namespace detail {

inline void check_bin(int v, std::size_t bins, const std::string& where) {
  if (v < 0 || static_cast<std::size_t>(v) >= bins) {
    throw FormatError("serialize: " + where + ": coordinate bin " + std::to_string(v) +
                      " outside [0, " + std::to_string(bins - 1) + "]");
  }
}

inline void serialize_one(const Element& e, std::size_t bins, const std::string& where,
                          bool in_body, std::string& out);

inline void serialize_list(const ElementList& elements, std::size_t bins,
                           const std::string& prefix, bool in_body, std::string& out) {
  bool seen_ref = false;
  for (std::size_t i = 0; i < elements.size(); ++i) {
    const std::string where = prefix + std::to_string(i);
    if (seen_ref && !elements[i].is<ObjectRef>()) {
      // Anything after a reference would be absorbed into its body on
      // re-parse, so the canonical form forbids it.
      throw FormatError("serialize: " + where +
                        ": non-reference element after an object reference");
    }
    if (i > 0 && elements[i].is<MaskQuery>() && elements[i - 1].is<MaskQuery>()) {
      throw FormatError("serialize: " + where +
                        ": adjacent mask queries would merge into one on re-parse");
    }
    if (elements[i].is<ObjectRef>()) seen_ref = true;
    serialize_one(elements[i], bins, where, in_body, out);
  }
}

inline void serialize_one(const Element& e, std::size_t bins, const std::string& where,
                          bool in_body, std::string& out) {
  struct Visitor {
    std::size_t bins;
    const std::string& where;
    bool in_body;
    std::string& out;

    void operator()(const Box& b) const {
      check_bin(b.x1, bins, where);
      check_bin(b.y1, bins, where);
      check_bin(b.x2, bins, where);
      check_bin(b.y2, bins, where);
      if (b.x1 > b.x2 || b.y1 > b.y2) {
        throw FormatError("serialize: " + where + ": box corners are not normalized");
      }
      out.append(kBoxStart);
      out += "(" + std::to_string(b.x1) + "," + std::to_string(b.y1) + "),(" +
             std::to_string(b.x2) + "," + std::to_string(b.y2) + ")";
      out.append(kBoxEnd);
    }
    void operator()(const Point& p) const {
      check_bin(p.x, bins, where);
      check_bin(p.y, bins, where);
      out.append(kPointStart);
      out += "(" + std::to_string(p.x) + "," + std::to_string(p.y) + ")";
      out.append(kPointEnd);
    }
    void operator()(const Line& l) const {
      check_bin(l.x1, bins, where);
      check_bin(l.y1, bins, where);
      check_bin(l.x2, bins, where);
      check_bin(l.y2, bins, where);
      out.append(kLineStart);
      out += "(" + std::to_string(l.x1) + "," + std::to_string(l.y1) + "),(" +
             std::to_string(l.x2) + "," + std::to_string(l.y2) + ")";
      out.append(kLineEnd);
    }
    void operator()(const MaskQuery& m) const {
      if (m.token_count < 1) {
        throw FormatError("serialize: " + where + ": mask query needs token_count >= 1");
      }
      for (std::size_t k = 0; k < m.token_count; ++k) out.append(kSegMask);
    }
    void operator()(const ObjectRef& r) const {
      if (in_body) {
        throw FormatError("serialize: " + where +
                          ": object reference inside another reference's body");
      }
      if (r.label.find("<|") != std::string::npos) {
        throw FormatError("serialize: " + where + ": label contains a marker prefix");
      }
      out.append(kRefStart);
      out += r.label;
      out.append(kRefEnd);
      serialize_list(r.body, bins, where + ".body.", /*in_body=*/true, out);
    }
  };
  std::visit(Visitor{bins, where, in_body, out}, e.value);
}

}  // namespace detail

/// Emits the canonical tight form (no whitespace). Throws FormatError,
/// naming the element index, on any input the parser could not map back.
inline std::string serialize(const ElementList& elements, std::size_t bins = 1000) {
  if (bins < 2) throw ConfigError("serialize: bins must be >= 2");
  std::string out;
  detail::serialize_list(elements, bins, "element ", /*in_body=*/false, out);
  return out;
}

// ---------------------------------------------------------------------------
// Parsing

enum class DiagCode {
  UnclosedMarker,
  UnexpectedToken,
  CoordOutOfRange,
  BadCoordArity,
  SegCountMismatch,
  NestedRef,
};

enum class Severity { error, warning };

inline std::string_view diag_code_name(DiagCode code) {
  switch (code) {
    case DiagCode::UnclosedMarker: return "UnclosedMarker";
    case DiagCode::UnexpectedToken: return "UnexpectedToken";
    case DiagCode::CoordOutOfRange: return "CoordOutOfRange";
    case DiagCode::BadCoordArity: return "BadCoordArity";
    case DiagCode::SegCountMismatch: return "SegCountMismatch";
    case DiagCode::NestedRef: return "NestedRef";
  }
  return "Unknown";
}

struct Diagnostic {
  std::size_t byte_offset = 0;
  Severity severity = Severity::error;
  DiagCode code = DiagCode::UnexpectedToken;
  std::string message;
};

struct ParseResult {
  ElementList elements;
  std::vector<Diagnostic> diagnostics;

  bool ok() const {
    return std::none_of(diagnostics.begin(), diagnostics.end(),
                        [](const Diagnostic& d) { return d.severity == Severity::error; });
  }
};

namespace detail {

struct CodecParser {
  std::string_view text;
  std::size_t bins;
  ParseResult result;
  // Index into result.elements of the reference currently absorbing
  // primitives, if any. An index survives vector growth where a pointer
  // would not.
  std::optional<std::size_t> open_ref;

  void diag(DiagCode code, std::size_t offset, std::string message) {
    result.diagnostics.push_back({offset, Severity::error, code, std::move(message)});
  }

  void emit(Element e) {
    if (open_ref) {
      std::get<ObjectRef>(result.elements[*open_ref].value).body.push_back(std::move(e));
    } else {
      result.elements.push_back(std::move(e));
    }
  }

  bool at(std::size_t pos, std::string_view lit) const {
    return text.substr(pos, lit.size()) == lit;
  }

  /// True if pos starts any of the marker literals.
  bool at_any_marker(std::size_t pos) const {
    for (std::string_view lit : {kBoxStart, kBoxEnd, kPointStart, kPointEnd, kLineStart,
                                 kLineEnd, kSegMask, kRefStart, kRefEnd}) {
      if (at(pos, lit)) return true;
    }
    return false;
  }

  std::size_t skip_ws(std::size_t pos) const {
    while (pos < text.size() &&
           (text[pos] == ' ' || text[pos] == '\t' || text[pos] == '\n' || text[pos] == '\r')) {
      ++pos;
    }
    return pos;
  }

  /// Decimal integer with optional sign; saturates far outside bin range so
  /// absurdly long digit strings still land in the range check.
  std::optional<long long> scan_int(std::size_t& pos) const {
    std::size_t p = pos;
    bool negative = false;
    if (p < text.size() && text[p] == '-') {
      negative = true;
      ++p;
    }
    if (p >= text.size() || text[p] < '0' || text[p] > '9') return std::nullopt;
    long long v = 0;
    while (p < text.size() && text[p] >= '0' && text[p] <= '9') {
      if (v < (1LL << 40)) v = v * 10 + (text[p] - '0');
      ++p;
    }
    pos = p;
    return negative ? -v : v;
  }

  /// Coordinate group for box/point/line. Returns the resume position.
  std::size_t parse_group(std::size_t open_off, std::string_view open_lit,
                          std::string_view end_lit, std::size_t want_pairs,
                          auto&& make_element) {
    std::size_t p = open_off + open_lit.size();
    std::vector<std::pair<long long, long long>> pairs;
    bool in_range = true;

    while (true) {
      p = skip_ws(p);
      if (p >= text.size()) {
        diag(DiagCode::UnclosedMarker, open_off,
             std::string(open_lit) + " never closed before end of input");
        return open_off + open_lit.size();
      }
      if (at(p, end_lit)) {
        const std::size_t end_off = p;
        p += end_lit.size();
        if (pairs.size() != want_pairs) {
          diag(DiagCode::BadCoordArity, end_off,
               std::string(open_lit) + " group has " + std::to_string(pairs.size()) +
                   " coordinate pairs, expected " + std::to_string(want_pairs));
        } else if (in_range) {
          emit(make_element(pairs));
        }
        return p;
      }
      if (at_any_marker(p)) {
        diag(DiagCode::UnclosedMarker, open_off,
             std::string(open_lit) + " interrupted by another marker");
        return p;  // resynchronize at that marker
      }
      if (text[p] == ',') {
        ++p;
        continue;
      }
      if (text[p] != '(') {
        diag(DiagCode::UnexpectedToken, p, "unexpected character in coordinate group");
        return p;
      }
      // One pair: '(' int ',' int ')'
      ++p;
      p = skip_ws(p);
      const std::size_t x_off = p;
      std::optional<long long> x = scan_int(p);
      if (!x) {
        diag(DiagCode::UnexpectedToken, p, "expected integer coordinate");
        return p;
      }
      p = skip_ws(p);
      if (p >= text.size() || text[p] != ',') {
        diag(DiagCode::UnexpectedToken, p, "expected ',' between coordinates");
        return p;
      }
      ++p;
      p = skip_ws(p);
      const std::size_t y_off = p;
      std::optional<long long> y = scan_int(p);
      if (!y) {
        diag(DiagCode::UnexpectedToken, p, "expected integer coordinate");
        return p;
      }
      p = skip_ws(p);
      if (p >= text.size() || text[p] != ')') {
        diag(DiagCode::UnexpectedToken, p, "expected ')' after coordinate pair");
        return p;
      }
      ++p;
      const long long hi = static_cast<long long>(bins) - 1;
      if (*x < 0 || *x > hi) {
        diag(DiagCode::CoordOutOfRange, x_off,
             "coordinate " + std::to_string(*x) + " outside [0, " + std::to_string(hi) + "]");
        in_range = false;
      }
      if (*y < 0 || *y > hi) {
        diag(DiagCode::CoordOutOfRange, y_off,
             "coordinate " + std::to_string(*y) + " outside [0, " + std::to_string(hi) + "]");
        in_range = false;
      }
      pairs.emplace_back(*x, *y);
    }
  }

  std::size_t parse_seg_run(std::size_t start) {
    std::size_t count = 0;
    std::size_t p = start;
    while (at(p, kSegMask)) {
      ++count;
      p += kSegMask.size();
      const std::size_t q = skip_ws(p);
      if (!at(q, kSegMask)) break;
      p = q;
    }
    emit(MaskQuery{count});
    return p;
  }

  std::size_t parse_ref(std::size_t start) {
    const std::size_t label_start = start + kRefStart.size();
    const std::size_t inner = text.find(kRefStart, label_start);
    const std::size_t close = text.find(kRefEnd, label_start);
    if (inner < close) {
      diag(DiagCode::NestedRef, inner,
           "object reference opened inside another reference's label");
      return inner;  // drop the outer, reparse from the inner marker
    }
    if (close == std::string_view::npos) {
      diag(DiagCode::UnclosedMarker, start,
           std::string(kRefStart) + " never closed before end of input");
      return label_start;
    }
    ObjectRef ref;
    ref.label = std::string(text.substr(label_start, close - label_start));
    result.elements.push_back(std::move(ref));  // refs are always top-level
    open_ref = result.elements.size() - 1;
    return close + kRefEnd.size();
  }

  void run() {
    std::size_t pos = 0;
    while (pos < text.size()) {
      const std::size_t m = text.find("<|", pos);
      if (m == std::string_view::npos) break;
      if (at(m, kBoxStart)) {
        pos = parse_group(m, kBoxStart, kBoxEnd, 2, [](const auto& pairs) {
          Box b{static_cast<int>(pairs[0].first), static_cast<int>(pairs[0].second),
                static_cast<int>(pairs[1].first), static_cast<int>(pairs[1].second)};
          if (b.x1 > b.x2) std::swap(b.x1, b.x2);
          if (b.y1 > b.y2) std::swap(b.y1, b.y2);
          return Element(b);
        });
      } else if (at(m, kPointStart)) {
        pos = parse_group(m, kPointStart, kPointEnd, 1, [](const auto& pairs) {
          return Element(Point{static_cast<int>(pairs[0].first),
                               static_cast<int>(pairs[0].second)});
        });
      } else if (at(m, kLineStart)) {
        pos = parse_group(m, kLineStart, kLineEnd, 2, [](const auto& pairs) {
          return Element(Line{static_cast<int>(pairs[0].first),
                              static_cast<int>(pairs[0].second),
                              static_cast<int>(pairs[1].first),
                              static_cast<int>(pairs[1].second)});
        });
      } else if (at(m, kSegMask)) {
        pos = parse_seg_run(m);
      } else if (at(m, kRefStart)) {
        pos = parse_ref(m);
      } else if (at(m, kBoxEnd) || at(m, kPointEnd) || at(m, kLineEnd) || at(m, kRefEnd)) {
        std::string_view lit = at(m, kBoxEnd)     ? kBoxEnd
                               : at(m, kPointEnd) ? kPointEnd
                               : at(m, kLineEnd)  ? kLineEnd
                                                  : kRefEnd;
        diag(DiagCode::UnexpectedToken, m, "unmatched " + std::string(lit));
        pos = m + lit.size();
      } else {
        pos = m + 2;  // "<|" that is not a marker: plain text
      }
    }
  }
};

}  // namespace detail

/// Total function: any byte sequence yields elements in textual order plus
/// diagnostics; malformed fragments are dropped and scanning resumes at the
/// next marker.
inline ParseResult parse(std::string_view text, std::size_t bins = 1000) {
  if (bins < 2) throw ConfigError("parse: bins must be >= 2");
  detail::CodecParser p{text, bins, {}, std::nullopt};
  p.run();
  return std::move(p.result);
}

// ---------------------------------------------------------------------------
// Task validation

enum class GroundingTask { segment, detect, point, line };

inline std::string_view task_name(GroundingTask task) {
  switch (task) {
    case GroundingTask::segment: return "segment";
    case GroundingTask::detect: return "detect";
    case GroundingTask::point: return "point";
    case GroundingTask::line: return "line";
  }
  return "unknown";
}

namespace detail {

inline void validate_kinds(const ElementList& elements, GroundingTask task, std::size_t n_query,
                           const std::string& prefix, std::vector<Diagnostic>& out) {
  for (std::size_t i = 0; i < elements.size(); ++i) {
    const Element& e = elements[i];
    const std::string where = prefix + std::to_string(i);
    if (e.is<ObjectRef>()) {
      // References wrap primitives for any task; only their bodies are judged.
      validate_kinds(e.as<ObjectRef>().body, task, n_query, where + ".body.", out);
      continue;
    }
    const bool matches = (task == GroundingTask::segment && e.is<MaskQuery>()) ||
                         (task == GroundingTask::detect && e.is<Box>()) ||
                         (task == GroundingTask::point && e.is<Point>()) ||
                         (task == GroundingTask::line && e.is<Line>());
    if (!matches) {
      out.push_back({0, Severity::warning, DiagCode::UnexpectedToken,
                     where + ": " + kind_name(e) + " element in a " +
                         std::string(task_name(task)) + " response"});
      continue;
    }
    if (task == GroundingTask::segment && e.as<MaskQuery>().token_count != n_query) {
      out.push_back({0, Severity::error, DiagCode::SegCountMismatch,
                     where + ": mask query has " +
                         std::to_string(e.as<MaskQuery>().token_count) +
                         " tokens, expected " + std::to_string(n_query)});
    }
  }
}

}  // namespace detail

/// Checks element kinds against the requested task; for segmentation, also
/// checks each mask query's token count. Kind mismatches are warnings, count
/// mismatches errors. Diagnostic offsets are element indices encoded in the
/// message; byte_offset is 0 because no source text is involved.
inline std::vector<Diagnostic> validate_against_task(const ElementList& elements,
                                                     GroundingTask task,
                                                     std::size_t n_query = 16) {
  std::vector<Diagnostic> out;
  detail::validate_kinds(elements, task, n_query, "element ", out);
  return out;
}

}  // namespace umvl

#endif  // UMVL_GROUNDING_HPP_
