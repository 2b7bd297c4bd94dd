// Copyright 2026 The factree Authors.
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

#ifndef FACTREE_CORE_ERROR_HPP_
#define FACTREE_CORE_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace factree {

// Numeric values are mirrored by the FACT_ERR_* codes of the C API.
enum class ErrorCode : int {
  kParse = 1,
  kValidation = 2,
  kEmptyDataset = 3,
  kDivergence = 4,
  kState = 5,
  kNotFound = 6,
  kVersion = 7,
  kChecksum = 8,
  kSchema = 9,
  kIo = 10,
  kInternal = 11,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& message)
      : Error(ErrorCode::kParse,
              "line " + std::to_string(line) + ": " + message),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& message)
      : Error(ErrorCode::kValidation, message) {}
};

class DivergenceError : public Error {
 public:
  explicit DivergenceError(int epoch)
      : Error(ErrorCode::kDivergence,
              "non-finite objective at epoch " + std::to_string(epoch)),
        epoch_(epoch) {}

  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

class StateError : public Error {
 public:
  explicit StateError(const std::string& message)
      : Error(ErrorCode::kState, message) {}
};

class NotFoundError : public Error {
 public:
  explicit NotFoundError(const std::string& message)
      : Error(ErrorCode::kNotFound, message) {}
};

}  // namespace factree

#endif  // FACTREE_CORE_ERROR_HPP_
