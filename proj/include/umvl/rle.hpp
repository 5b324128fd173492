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
// Run-length mask storage: background-first runs over row-major pixels.

#ifndef UMVL_RLE_HPP_
#define UMVL_RLE_HPP_

#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "umvl/errors.hpp"
#include "umvl/tensor.hpp"

namespace umvl {

struct RleMask {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::size_t> counts;

  friend bool operator==(const RleMask&, const RleMask&) = default;
};

/// Background-first convention: counts[0] is the length of the leading run
/// of zeros (0 when the mask starts with a foreground pixel).
inline RleMask rle_encode(const BinaryMask& mask) {
  RleMask r;
  r.height = mask.height;
  r.width = mask.width;
  std::uint8_t current = 0;
  std::size_t run = 0;
  for (std::size_t i = 0; i < mask.data.size(); ++i) {
    if (mask.data[i] > 1) {
      throw RangeError("rle_encode: mask entries must be 0 or 1");
    }
    if (mask.data[i] == current) {
      ++run;
    } else {
      r.counts.push_back(run);
      current = mask.data[i];
      run = 1;
    }
  }
  if (run > 0) r.counts.push_back(run);
  return r;
}

inline BinaryMask rle_decode(const RleMask& r) {
  const std::size_t total = std::accumulate(r.counts.begin(), r.counts.end(), std::size_t{0});
  if (total != r.height * r.width) {
    throw FormatError("rle_decode: counts sum to " + std::to_string(total) + ", expected " +
                      std::to_string(r.height * r.width) + " for a " +
                      std::to_string(r.height) + "x" + std::to_string(r.width) + " mask");
  }
  BinaryMask mask(r.height, r.width);
  std::size_t pos = 0;
  std::uint8_t value = 0;
  for (std::size_t run : r.counts) {
    for (std::size_t k = 0; k < run; ++k) mask.data[pos++] = value;
    value ^= 1;
  }
  return mask;
}

}  // namespace umvl

#endif  // UMVL_RLE_HPP_
