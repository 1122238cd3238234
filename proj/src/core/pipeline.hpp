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
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "core/embedding_store.hpp"
#include "core/flow_matching.hpp"
#include "core/retrieval.hpp"

namespace emorag {

struct SynthesisRequest {
    EmotionEmbedding reference_embedding;
    std::string target_text;
    std::optional<IntensityLevel> intensity;
    RetrievalMethod method = RetrievalMethod::kClustering;
    std::uint64_t seed = 0;
    std::uint32_t ode_steps = kDefaultOdeSteps;
};

struct PromptAssembly {
    std::string record_id;
    FrameSequence prompt_tokens;
    std::string prompt_text;
    std::string target_text;
    SpeakerEmbedding speaker;
};

// Where reference emotion embeddings come from. The file provider reads the
// JSON array written by save_embedding_json.
class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    virtual EmotionEmbedding embed(const std::filesystem::path& source) const = 0;
};

class FileEmbeddingProvider : public EmbeddingProvider {
public:
    EmotionEmbedding embed(const std::filesystem::path& source) const override { return load_embedding_json(source); }
};

// Precomputed token features per database record.
class TokenSource {
public:
    virtual ~TokenSource() = default;
    // Raises kMissingAsset when the record has no token features.
    virtual FrameSequence tokens_for(const UtteranceRecord& record) const = 0;
};

// Reads <dir>/<record id>.frames.
class DirectoryTokenSource : public TokenSource {
public:
    explicit DirectoryTokenSource(std::filesystem::path dir) : dir_(std::move(dir)) {}
    FrameSequence tokens_for(const UtteranceRecord& record) const override;
    static std::filesystem::path file_for(const std::filesystem::path& dir, std::string_view id);

private:
    std::filesystem::path dir_;
};

class InMemoryTokenSource : public TokenSource {
public:
    void add(std::string id, FrameSequence tokens) { tokens_.insert_or_assign(std::move(id), std::move(tokens)); }
    FrameSequence tokens_for(const UtteranceRecord& record) const override;

private:
    std::map<std::string, FrameSequence, std::less<>> tokens_;
};

// Stand-in for the autoregressive speech-token model.
class TokenGenerator {
public:
    virtual ~TokenGenerator() = default;
    // Returns the prompt tokens followed by the generated continuation, at 50 Hz.
    virtual FrameSequence generate(const PromptAssembly& assembly, std::uint64_t seed) const = 0;
};

class MockTokenGenerator : public TokenGenerator {
public:
    static constexpr double kTokenRateHz = 50.0;

    explicit MockTokenGenerator(std::uint32_t token_dim = kDefaultTokenDim, std::uint32_t frames_per_char = 4)
        : token_dim_(token_dim), frames_per_char_(frames_per_char) {}

    // Continuation frames are the prompt's mean frame plus seeded N(0, 0.25) noise;
    // 4 frames per UTF-8 code point of the target text by default.
    FrameSequence generate(const PromptAssembly& assembly, std::uint64_t seed) const override;

    std::uint32_t frames_per_char() const noexcept { return frames_per_char_; }

private:
    std::uint32_t token_dim_;
    std::uint32_t frames_per_char_;
};

std::size_t utf8_length(std::string_view text);

PromptAssembly assemble_prompt(const RetrievalResult& result, const EmbeddingDatabase& db,
                               const SynthesisRequest& request, const TokenSource& tokens,
                               std::uint32_t speaker_dim = kDefaultSpeakerDim);

struct RunReport {
    std::string retrieved_id;
    std::string retrieved_emotion;
    IntensityLevel retrieved_intensity = IntensityLevel::kNormal;
    double similarity = 0.0;
    RetrievalMethod method = RetrievalMethod::kClustering;
    std::optional<IntensityLevel> intensity;
    std::vector<std::pair<std::string, std::uint64_t>> stage_timings_ns;
    std::uint64_t wall_time_ns = 0;
    std::string output_path;
    std::uint64_t seed = 0;
    std::size_t mel_frames = 0;
    std::size_t mel_dim = 0;
    double mel_frame_rate_hz = 0.0;

    nlohmann::json to_json() const;
};

struct InferenceAssets {
    const EmbeddingDatabase* db = nullptr;
    const IndexSet* indices = nullptr;  // required for clustering retrieval
    const VectorFieldModel* model = nullptr;
    const TokenSource* tokens = nullptr;
    const TokenGenerator* generator = nullptr;
};

// retrieve -> assemble_prompt -> token generation -> generate_mel -> write.
// Failures are rethrown as StageError naming the stage.
RunReport run_inference(const SynthesisRequest& request, const InferenceAssets& assets,
                        const std::filesystem::path& output_path);

// Writes <dir>/<id>.frames for every record: 20-60 seeded token frames at 50 Hz.
void write_token_fixtures(const EmbeddingDatabase& db, const std::filesystem::path& dir, std::uint32_t token_dim,
                          std::uint64_t seed);

}  // namespace emorag
