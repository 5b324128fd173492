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
// On-disk formats for decoder state: a raw little-endian float64 blob with a
// JSON sidecar describing field layout, plus JSON codecs for configs and
// feature matrices. The blob starts with the magic string "UMVL-DEC-1".

#ifndef UMVL_DECODER_IO_HPP_
#define UMVL_DECODER_IO_HPP_

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "umvl/decoder.hpp"
#include "umvl/errors.hpp"
#include "umvl/tensor.hpp"

namespace umvl {

inline constexpr char kParamsMagic[] = "UMVL-DEC-1";

namespace detail {

inline void append_f64_le(std::string& out, double v) {
  std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) {
    out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
  }
}

inline double read_f64_le(const std::string& buf, std::size_t offset) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) {
    bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[offset + i])) << (8 * i);
  }
  return std::bit_cast<double>(bits);
}

inline std::string slurp_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failure on " + path.string());
  return buf;
}

inline void spew_file(const std::filesystem::path& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw IoError("write failure on " + path.string());
}

struct ParamField {
  std::string name;
  std::vector<std::size_t> shape;
  const std::vector<double>* values;
};

inline std::vector<ParamField> param_fields(const DecoderParams& p) {
  return {
      {"proj_img.w", {p.proj_img.weight.rows, p.proj_img.weight.cols}, &p.proj_img.weight.data},
      {"proj_img.b", {p.proj_img.bias.size()}, &p.proj_img.bias},
      {"proj_ker1.w", {p.proj_ker1.weight.rows, p.proj_ker1.weight.cols}, &p.proj_ker1.weight.data},
      {"proj_ker1.b", {p.proj_ker1.bias.size()}, &p.proj_ker1.bias},
      {"proj_ker2.w", {p.proj_ker2.weight.rows, p.proj_ker2.weight.cols}, &p.proj_ker2.weight.data},
      {"proj_ker2.b", {p.proj_ker2.bias.size()}, &p.proj_ker2.bias},
      {"ln_gamma", {p.ln_gamma.size()}, &p.ln_gamma},
      {"ln_beta", {p.ln_beta.size()}, &p.ln_beta},
  };
}

}  // namespace detail

/// Writes params as <bin_path> (magic + packed little-endian doubles) and
/// <json_path> (field names, shapes, and byte offsets into the blob).
inline void save_decoder_params(const DecoderParams& params, const std::filesystem::path& bin_path,
                                const std::filesystem::path& json_path) {
  const auto fields = detail::param_fields(params);
  std::string blob(kParamsMagic, sizeof(kParamsMagic) - 1);
  nlohmann::json meta;
  meta["magic"] = kParamsMagic;
  meta["data_file"] = bin_path.filename().string();
  meta["fields"] = nlohmann::json::array();
  for (const auto& f : fields) {
    nlohmann::json jf;
    jf["name"] = f.name;
    jf["shape"] = f.shape;
    jf["byte_offset"] = blob.size();
    meta["fields"].push_back(jf);
    for (double v : *f.values) detail::append_f64_le(blob, v);
  }
  detail::spew_file(bin_path, blob);
  detail::spew_file(json_path, meta.dump(2) + "\n");
}

/// Loads params written by save_decoder_params. The blob is located via the
/// sidecar's data_file entry, resolved relative to the sidecar's directory.
inline DecoderParams load_decoder_params(const std::filesystem::path& json_path,
                                         const DecoderConfig& cfg) {
  cfg.validate();
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(detail::slurp_file(json_path));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("param sidecar " + json_path.string() + ": " + e.what());
  }
  if (!meta.contains("magic") || meta["magic"] != kParamsMagic) {
    throw FormatError("param sidecar " + json_path.string() + ": missing or wrong magic");
  }
  if (!meta.contains("data_file") || !meta.contains("fields")) {
    throw FormatError("param sidecar " + json_path.string() + ": missing data_file or fields");
  }
  const std::filesystem::path bin_path =
      json_path.parent_path() / meta["data_file"].get<std::string>();
  const std::string blob = detail::slurp_file(bin_path);
  const std::size_t magic_len = sizeof(kParamsMagic) - 1;
  if (blob.size() < magic_len || blob.compare(0, magic_len, kParamsMagic) != 0) {
    throw FormatError("param blob " + bin_path.string() + ": missing magic header");
  }

  DecoderParams params = DecoderParams::zeros(cfg);
  auto fields = detail::param_fields(params);
  if (meta["fields"].size() != fields.size()) {
    throw FormatError("param sidecar: expected " + std::to_string(fields.size()) +
                      " fields, found " + std::to_string(meta["fields"].size()));
  }
  for (std::size_t i = 0; i < fields.size(); ++i) {
    const nlohmann::json& jf = meta["fields"][i];
    if (jf.value("name", "") != fields[i].name) {
      throw FormatError("param sidecar: field " + std::to_string(i) + " is '" +
                        jf.value("name", "") + "', expected '" + fields[i].name + "'");
    }
    const auto shape = jf.value("shape", std::vector<std::size_t>{});
    if (shape != fields[i].shape) {
      throw FormatError("param sidecar: field '" + fields[i].name +
                        "' shape does not match config");
    }
    const std::size_t offset = jf.value("byte_offset", std::size_t{0});
    auto* values = const_cast<std::vector<double>*>(fields[i].values);
    const std::size_t count = values->size();
    if (offset < magic_len || offset + count * 8 > blob.size()) {
      throw FormatError("param blob: field '" + fields[i].name + "' extends past end of file");
    }
    for (std::size_t k = 0; k < count; ++k) {
      (*values)[k] = detail::read_f64_le(blob, offset + 8 * k);
    }
  }
  return params;
}

inline nlohmann::json decoder_config_to_json(const DecoderConfig& cfg) {
  return nlohmann::json{{"d_llm", cfg.d_llm}, {"c_dec", cfg.c_dec}, {"n_query", cfg.n_query},
                        {"h_vis", cfg.h_vis}, {"w_vis", cfg.w_vis}, {"h_out", cfg.h_out},
                        {"w_out", cfg.w_out}, {"eps", cfg.eps}};
}

inline DecoderConfig decoder_config_from_json(const nlohmann::json& j) {
  DecoderConfig cfg;
  try {
    cfg.d_llm = j.at("d_llm").get<std::size_t>();
    cfg.c_dec = j.value("c_dec", cfg.c_dec);
    cfg.n_query = j.value("n_query", cfg.n_query);
    cfg.h_vis = j.at("h_vis").get<std::size_t>();
    cfg.w_vis = j.at("w_vis").get<std::size_t>();
    cfg.h_out = j.at("h_out").get<std::size_t>();
    cfg.w_out = j.at("w_out").get<std::size_t>();
    cfg.eps = j.value("eps", cfg.eps);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("decoder config json: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

namespace detail {

inline Matrix matrix_from_json(const nlohmann::json& j, const std::string& what) {
  try {
    Matrix m(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>());
    const auto data = j.at("data").get<std::vector<double>>();
    if (data.size() != m.data.size()) {
      throw FormatError(what + ": data has " + std::to_string(data.size()) +
                        " values, expected rows*cols=" + std::to_string(m.data.size()));
    }
    m.data = data;
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(what + ": " + e.what());
  }
}

inline nlohmann::json matrix_to_json(const Matrix& m) {
  return nlohmann::json{{"rows", m.rows}, {"cols", m.cols}, {"data", m.data}};
}

}  // namespace detail

struct DecoderFeatures {
  Matrix f_img;
  Matrix f_q;
};

inline void save_decoder_features(const DecoderFeatures& feats,
                                  const std::filesystem::path& path) {
  nlohmann::json j;
  j["f_img"] = detail::matrix_to_json(feats.f_img);
  j["f_q"] = detail::matrix_to_json(feats.f_q);
  detail::spew_file(path, j.dump() + "\n");
}

inline DecoderFeatures load_decoder_features(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(detail::slurp_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("features file " + path.string() + ": " + e.what());
  }
  if (!j.contains("f_img") || !j.contains("f_q")) {
    throw FormatError("features file " + path.string() + ": needs f_img and f_q");
  }
  return {detail::matrix_from_json(j["f_img"], "f_img"),
          detail::matrix_from_json(j["f_q"], "f_q")};
}

}  // namespace umvl

#endif  // UMVL_DECODER_IO_HPP_
