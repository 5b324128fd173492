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

#ifndef UMVL_TENSOR_HPP_
#define UMVL_TENSOR_HPP_

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "umvl/errors.hpp"

namespace umvl {

/// Dense rank-3 array, row-major within a channel, channels outermost.
/// Index (c, y, x) maps to data[(c * height + y) * width + x].
struct FeatureMap {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> data;

  FeatureMap() = default;
  FeatureMap(std::size_t c, std::size_t h, std::size_t w)
      : channels(c), height(h), width(w), data(c * h * w, 0.0) {}

  std::size_t size() const { return channels * height * width; }

  double& at(std::size_t c, std::size_t y, std::size_t x) {
    return data[(c * height + y) * width + x];
  }
  double at(std::size_t c, std::size_t y, std::size_t x) const {
    return data[(c * height + y) * width + x];
  }
};

/// Dense row-major matrix; data[r * cols + c].
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  std::size_t size() const { return rows * cols; }

  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

/// 2x2 transposed-convolution kernel bank, indexed [in][out][kh][kw].
struct KernelTensor {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  static constexpr std::size_t kKh = 2;
  static constexpr std::size_t kKw = 2;
  std::vector<double> data;

  KernelTensor() = default;
  KernelTensor(std::size_t ci, std::size_t co)
      : in_channels(ci), out_channels(co), data(ci * co * kKh * kKw, 0.0) {}

  std::size_t size() const { return in_channels * out_channels * kKh * kKw; }

  double& at(std::size_t ci, std::size_t co, std::size_t a, std::size_t b) {
    return data[((ci * out_channels + co) * kKh + a) * kKw + b];
  }
  double at(std::size_t ci, std::size_t co, std::size_t a, std::size_t b) const {
    return data[((ci * out_channels + co) * kKh + a) * kKw + b];
  }
};

/// Pre-sigmoid mask scores on a height x width grid, row-major.
struct MaskLogits {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> data;

  MaskLogits() = default;
  MaskLogits(std::size_t h, std::size_t w) : height(h), width(w), data(h * w, 0.0) {}

  std::size_t size() const { return height * width; }

  double& at(std::size_t y, std::size_t x) { return data[y * width + x]; }
  double at(std::size_t y, std::size_t x) const { return data[y * width + x]; }
};

/// Hard 0/1 mask, row-major.
struct BinaryMask {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> data;

  BinaryMask() = default;
  BinaryMask(std::size_t h, std::size_t w) : height(h), width(w), data(h * w, 0) {}

  std::size_t size() const { return height * width; }

  std::uint8_t& at(std::size_t y, std::size_t x) { return data[y * width + x]; }
  std::uint8_t at(std::size_t y, std::size_t x) const { return data[y * width + x]; }

  bool operator==(const BinaryMask& other) const {
    return height == other.height && width == other.width && data == other.data;
  }
};

/// Numerically stable logistic function.
inline double sigmoid(double z) {
  if (z >= 0.0) {
    return 1.0 / (1.0 + std::exp(-z));
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline void require(bool cond, const std::string& what) {
  if (!cond) throw DimensionError(what);
}

}  // namespace umvl

#endif  // UMVL_TENSOR_HPP_
