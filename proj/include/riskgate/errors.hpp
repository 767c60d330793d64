// Copyright 2026 The riskgate Authors.
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

namespace riskgate {

// Error taxonomy shared by the library and the command-line tool. Each
// category maps to one process exit code (see src/cli.cpp).
enum class ErrorCategory {
  kInput,      // malformed files, bad arguments, unknown config keys
  kProtocol,   // evaluation protocol violated (e.g. no non-mated trials)
  kNumerical,  // NaN/Inf, degenerate embeddings, divergence
};

const char* CategoryName(ErrorCategory category);

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& message)
      : std::runtime_error(message), category_(category) {}

  ErrorCategory category() const { return category_; }

 private:
  ErrorCategory category_;
};

class InputError : public Error {
 public:
  explicit InputError(const std::string& message)
      : Error(ErrorCategory::kInput, message) {}
};

class ProtocolError : public Error {
 public:
  explicit ProtocolError(const std::string& message)
      : Error(ErrorCategory::kProtocol, message) {}
};

class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& message)
      : Error(ErrorCategory::kNumerical, message) {}
};

// Raised when an embedding (or any vector being normalized) has a norm at or
// below the configured floor.
class DegenerateEmbeddingError : public NumericalError {
 public:
  explicit DegenerateEmbeddingError(const std::string& message)
      : NumericalError(message) {}
};

// Shape and argument preconditions of the numeric primitives.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace riskgate
