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

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "core/io.hpp"

namespace emorag {

enum class IntensityLevel : std::uint8_t { kWeak = 0, kNormal = 1, kStrong = 2 };

inline constexpr IntensityLevel kAllIntensityLevels[] = {
    IntensityLevel::kWeak, IntensityLevel::kNormal, IntensityLevel::kStrong};

std::string_view to_string(IntensityLevel level);
// Accepts exactly "weak", "normal" or "strong".
IntensityLevel parse_intensity(std::string_view text);

using EmotionEmbedding = std::vector<float>;

struct UtteranceRecord {
    std::string id;
    std::string emotion_label;
    IntensityLevel intensity = IntensityLevel::kNormal;
    EmotionEmbedding embedding;
    std::string transcript;
    std::optional<std::string> audio_ref;

    friend bool operator==(const UtteranceRecord&, const UtteranceRecord&) = default;
};

// Immutable, validated collection of utterance records sharing one embedding
// dimension. Construction checks every invariant; there are no mutators.
class EmbeddingDatabase {
public:
    static constexpr std::uint32_t kDefaultDim = 64;

    EmbeddingDatabase(std::uint32_t dim, std::vector<UtteranceRecord> records);

    std::uint32_t dim() const noexcept { return dim_; }
    std::size_t size() const noexcept { return records_.size(); }
    bool empty() const noexcept { return records_.empty(); }
    std::span<const UtteranceRecord> records() const noexcept { return records_; }
    const UtteranceRecord& operator[](std::size_t i) const { return records_[i]; }

    // Position of the record with this id, if any.
    std::optional<std::size_t> find(std::string_view id) const;

    // SHA-256 of the canonical EMDB encoding.
    const io::Digest& fingerprint() const noexcept { return fingerprint_; }

    // Distinct emotion labels in first-appearance order.
    std::vector<std::string> labels() const;

private:
    std::uint32_t dim_;
    std::vector<UtteranceRecord> records_;
    io::Digest fingerprint_{};
};

bool bit_identical(const EmbeddingDatabase& a, const EmbeddingDatabase& b);

// EMDB binary format.
inline constexpr std::uint32_t kEmdbVersion = 1;
io::Bytes encode_db(const EmbeddingDatabase& db);
EmbeddingDatabase decode_db(std::span<const std::uint8_t> bytes);
EmbeddingDatabase load_db(const std::filesystem::path& path);
void save_db(const EmbeddingDatabase& db, const std::filesystem::path& path);

// JSON manifest used for authoring and for exporting embeddings to plotting
// tools: {"dim": N, "records": [{"id", "emotion", "intensity", "transcript",
// "audio_ref"?, "embedding": [...]}, ...]}.
EmbeddingDatabase import_manifest(const std::filesystem::path& path);
void export_manifest(const EmbeddingDatabase& db, const std::filesystem::path& path);

EmbeddingDatabase filter_by_intensity(const EmbeddingDatabase& db, IntensityLevel level);

EmotionEmbedding normalize_embedding(std::span<const float> e);

// Single embedding stored as a JSON array of numbers.
EmotionEmbedding load_embedding_json(const std::filesystem::path& path);
void save_embedding_json(std::span<const float> e, const std::filesystem::path& path);

}  // namespace emorag
