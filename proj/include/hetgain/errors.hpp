// Copyright 2026 The hetgain Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace hetgain {

// Invalid numeric argument (non-finite input, boundary where a quantity is
// undefined, empty sample).
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Inconsistent configuration: bad arm count, rho outside the PSD bound,
// wrong vector length, empty grid.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed input file. Row numbers are 1-based and count the header.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t row)
      : std::runtime_error("row " + std::to_string(row) + ": " + what), row_(row) {}
  explicit ParseError(const std::string& what) : std::runtime_error(what), row_(0) {}

  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

// Broken internal invariant, e.g. a NaN escaping a simulation.
class InternalError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace hetgain
