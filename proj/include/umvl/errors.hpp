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

#ifndef UMVL_ERRORS_HPP_
#define UMVL_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace umvl {

/// Base class for all umvl error conditions.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Incompatible tensor/matrix shapes; the message names the offending axis.
class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& what) : Error(what) {}
};

/// Invalid configuration (divisibility constraints, bad field values).
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(what) {}
};

/// Value outside its admissible range (coordinates, bins, degenerate boxes).
class RangeError : public Error {
 public:
  explicit RangeError(const std::string& what) : Error(what) {}
};

/// Non-finite value where a finite one is required (probes, descent).
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(what) {}
};

/// Filesystem-level failure (unreadable, unwritable).
class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(what) {}
};

/// Structurally invalid input data (corrupt masks, bad headers, bad JSON).
class FormatError : public Error {
 public:
  explicit FormatError(const std::string& what) : Error(what) {}
};

}  // namespace umvl

#endif  // UMVL_ERRORS_HPP_
