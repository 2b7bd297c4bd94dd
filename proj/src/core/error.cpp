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

#include "core/error.hpp"

namespace factree {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kParse:
      return "parse_error";
    case ErrorCode::kValidation:
      return "validation_error";
    case ErrorCode::kEmptyDataset:
      return "empty_dataset";
    case ErrorCode::kDivergence:
      return "divergence";
    case ErrorCode::kState:
      return "state_error";
    case ErrorCode::kNotFound:
      return "not_found";
    case ErrorCode::kVersion:
      return "version_error";
    case ErrorCode::kChecksum:
      return "checksum_error";
    case ErrorCode::kSchema:
      return "schema_error";
    case ErrorCode::kIo:
      return "io_error";
    case ErrorCode::kInternal:
      return "internal_error";
  }
  return "unknown_error";
}

}  // namespace factree
