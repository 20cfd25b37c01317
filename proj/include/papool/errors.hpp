// Copyright 2026 The papool Authors
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

#pragma once

#include <stdexcept>
#include <string>

namespace papool {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor shapes do not fit together.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// An argument is outside the accepted domain (indices, counts, labels).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A model/run configuration is inconsistent.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A call contract was violated by the caller (e.g. backward on a non-scalar).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Malformed text input. Carries the 1-based line number when known.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Malformed binary file (bad magic, version or truncation).
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace papool
