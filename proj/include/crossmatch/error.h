/* Copyright 2026 The crossmatch Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef CROSSMATCH_ERROR_H_
#define CROSSMATCH_ERROR_H_

#include <stdexcept>
#include <string>
#include <string_view>

namespace crossmatch {

enum class ErrorCode {
  kBounds,
  kDegenerateRegion,
  kDimensionMismatch,
  kInvalidArgument,
  kConfiguration,
  kFormat,
  kNumerical,
  kEmptySearch,
  kIo,
};

std::string_view ErrorCodeName(ErrorCode code);

// Single exception type for the library. The code is what the CLI reports
// in its machine-readable error record.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

// Format errors carry the byte offset at which parsing failed.
class FormatError : public Error {
 public:
  FormatError(const std::string& message, std::size_t offset)
      : Error(ErrorCode::kFormat,
              message + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

}  // namespace crossmatch

#endif  // CROSSMATCH_ERROR_H_
