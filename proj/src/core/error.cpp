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

#include "core/error.hpp"

namespace emorag {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::kOk: return "ok";
        case ErrorCode::kInvalidArgument: return "invalid_argument";
        case ErrorCode::kIo: return "io_error";
        case ErrorCode::kMalformedHeader: return "malformed_header";
        case ErrorCode::kDimensionMismatch: return "dimension_mismatch";
        case ErrorCode::kDuplicateId: return "duplicate_id";
        case ErrorCode::kNonFinite: return "non_finite";
        case ErrorCode::kZeroNorm: return "zero_norm";
        case ErrorCode::kNoCandidates: return "no_candidates";
        case ErrorCode::kEmptySubset: return "empty_subset";
        case ErrorCode::kStaleIndex: return "stale_index";
        case ErrorCode::kMissingAsset: return "missing_asset";
        case ErrorCode::kDivergence: return "training_divergence";
        case ErrorCode::kBufferTooSmall: return "buffer_too_small";
        case ErrorCode::kInternal: return "internal";
    }
    return "unknown";
}

}  // namespace emorag
