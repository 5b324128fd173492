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
// Kind-tagged JSON representation of grounding elements and diagnostics,
// the interchange form between the codec and the evaluation harness.

#ifndef UMVL_GROUNDING_JSON_HPP_
#define UMVL_GROUNDING_JSON_HPP_

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "umvl/errors.hpp"
#include "umvl/grounding.hpp"

namespace umvl {

inline nlohmann::json element_to_json(const Element& e) {
  struct Visitor {
    nlohmann::json operator()(const Box& b) const {
      return {{"kind", "box"}, {"x1", b.x1}, {"y1", b.y1}, {"x2", b.x2}, {"y2", b.y2}};
    }
    nlohmann::json operator()(const Point& p) const {
      return {{"kind", "point"}, {"x", p.x}, {"y", p.y}};
    }
    nlohmann::json operator()(const Line& l) const {
      return {{"kind", "line"}, {"x1", l.x1}, {"y1", l.y1}, {"x2", l.x2}, {"y2", l.y2}};
    }
    nlohmann::json operator()(const MaskQuery& m) const {
      return {{"kind", "mask_query"}, {"token_count", m.token_count}};
    }
    nlohmann::json operator()(const ObjectRef& r) const {
      nlohmann::json body = nlohmann::json::array();
      for (const Element& child : r.body) body.push_back(element_to_json(child));
      return {{"kind", "object_ref"}, {"label", r.label}, {"body", body}};
    }
  };
  return std::visit(Visitor{}, e.value);
}

inline nlohmann::json elements_to_json(const ElementList& elements) {
  nlohmann::json arr = nlohmann::json::array();
  for (const Element& e : elements) arr.push_back(element_to_json(e));
  return arr;
}

inline Element element_from_json(const nlohmann::json& j);

inline ElementList elements_from_json(const nlohmann::json& arr) {
  if (!arr.is_array()) throw FormatError("element list json: expected an array");
  ElementList out;
  out.reserve(arr.size());
  for (const auto& j : arr) out.push_back(element_from_json(j));
  return out;
}

inline Element element_from_json(const nlohmann::json& j) {
  try {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "box") {
      return Box{j.at("x1").get<int>(), j.at("y1").get<int>(), j.at("x2").get<int>(),
                 j.at("y2").get<int>()};
    }
    if (kind == "point") {
      return Point{j.at("x").get<int>(), j.at("y").get<int>()};
    }
    if (kind == "line") {
      return Line{j.at("x1").get<int>(), j.at("y1").get<int>(), j.at("x2").get<int>(),
                  j.at("y2").get<int>()};
    }
    if (kind == "mask_query") {
      return MaskQuery{j.at("token_count").get<std::size_t>()};
    }
    if (kind == "object_ref") {
      ObjectRef r;
      r.label = j.at("label").get<std::string>();
      r.body = elements_from_json(j.at("body"));
      return Element(std::move(r));
    }
    throw FormatError("element json: unknown kind '" + kind + "'");
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("element json: ") + e.what());
  }
}

inline nlohmann::json diagnostic_to_json(const Diagnostic& d) {
  return {{"byte_offset", d.byte_offset},
          {"severity", d.severity == Severity::error ? "error" : "warning"},
          {"code", std::string(diag_code_name(d.code))},
          {"message", d.message}};
}

inline nlohmann::json diagnostics_to_json(const std::vector<Diagnostic>& diags) {
  nlohmann::json arr = nlohmann::json::array();
  for (const Diagnostic& d : diags) arr.push_back(diagnostic_to_json(d));
  return arr;
}

}  // namespace umvl

#endif  // UMVL_GROUNDING_JSON_HPP_
