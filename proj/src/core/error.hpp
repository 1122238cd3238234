// Copyright 2026 the emorag authors
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
#include <string_view>

namespace emorag {

// Error classes surfaced by the core. The numeric values are mirrored by
// emorag_status in the C API header and must stay in sync with it.
enum class ErrorCode : int {
    kOk = 0,
    kInvalidArgument = 1,
    kIo = 2,
    kMalformedHeader = 3,
    kDimensionMismatch = 4,
    kDuplicateId = 5,
    kNonFinite = 6,
    kZeroNorm = 7,
    kNoCandidates = 8,
    kEmptySubset = 9,
    kStaleIndex = 10,
    kMissingAsset = 11,
    kDivergence = 12,
    kBufferTooSmall = 13,
    kInternal = 99,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

// An error raised by one stage of the inference pipeline. The stage name is
// carried so that callers can attribute the failure.
class StageError : public Error {
public:
    StageError(std::string stage, ErrorCode code, const std::string& message)
        : Error(code, stage + ": " + message), stage_(std::move(stage)) {}

    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

}  // namespace emorag
