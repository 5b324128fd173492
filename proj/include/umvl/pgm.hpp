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

#ifndef UMVL_PGM_HPP_
#define UMVL_PGM_HPP_

#include <filesystem>
#include <fstream>
#include <string>

#include "umvl/errors.hpp"
#include "umvl/tensor.hpp"

namespace umvl {

/// Binary PGM (P5), foreground white on black.
inline void write_pgm(const BinaryMask& mask, const std::filesystem::path& path) {
  if (mask.height < 1 || mask.width < 1) {
    throw DimensionError("write_pgm: mask must be nonempty");
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "P5\n" << mask.width << " " << mask.height << "\n255\n";
  for (std::uint8_t v : mask.data) {
    const char pixel = v ? static_cast<char>(255) : static_cast<char>(0);
    out.write(&pixel, 1);
  }
  if (!out) throw IoError("write failure on " + path.string());
}

}  // namespace umvl

#endif  // UMVL_PGM_HPP_
