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

#include "core/pipeline.hpp"

#include <chrono>
#include <random>

namespace emorag {
namespace {

using Clock = std::chrono::steady_clock;

template <typename F>
auto run_stage(std::string_view stage, std::vector<std::pair<std::string, std::uint64_t>>& timings, F&& body) {
    const auto start = Clock::now();
    auto record = [&] {
        timings.emplace_back(std::string(stage),
                             static_cast<std::uint64_t>(
                                 std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - start).count()));
    };
    try {
        auto value = body();
        record();
        return value;
    } catch (const StageError&) {
        throw;
    } catch (const Error& e) {
        throw StageError(std::string(stage), e.code(), e.what());
    } catch (const std::exception& e) {
        throw StageError(std::string(stage), ErrorCode::kInternal, e.what());
    }
}

}  // namespace

std::filesystem::path DirectoryTokenSource::file_for(const std::filesystem::path& dir, std::string_view id) {
    return dir / (std::string(id) + ".frames");
}

FrameSequence DirectoryTokenSource::tokens_for(const UtteranceRecord& record) const {
    const auto path = file_for(dir_, record.id);
    if (!std::filesystem::exists(path)) {
        throw Error(ErrorCode::kMissingAsset, "no token file for record '" + record.id + "' (" + path.string() + ")");
    }
    return load_frames(path);
}

FrameSequence InMemoryTokenSource::tokens_for(const UtteranceRecord& record) const {
    const auto it = tokens_.find(record.id);
    if (it == tokens_.end()) throw Error(ErrorCode::kMissingAsset, "no token features for record '" + record.id + "'");
    return it->second;
}

std::size_t utf8_length(std::string_view text) {
    std::size_t n = 0;
    for (unsigned char c : text) n += (c & 0xC0) != 0x80;
    return n;
}

FrameSequence MockTokenGenerator::generate(const PromptAssembly& assembly, std::uint64_t seed) const {
    const auto& prompt = assembly.prompt_tokens.frames;
    const Eigen::Index width = prompt.rows() > 0 ? prompt.cols() : token_dim_;
    const auto continuation = static_cast<Eigen::Index>(frames_per_char_ * utf8_length(assembly.target_text));

    Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(width);
    if (prompt.rows() > 0) mean = prompt.colwise().mean();

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 0.5);
    FrameSequence out;
    out.frame_rate_hz = kTokenRateHz;
    out.frames.resize(prompt.rows() + continuation, width);
    if (prompt.rows() > 0) out.frames.topRows(prompt.rows()) = prompt;
    for (Eigen::Index r = 0; r < continuation; ++r) {
        for (Eigen::Index c = 0; c < width; ++c) out.frames(prompt.rows() + r, c) = mean(c) + noise(rng);
    }
    return out;
}

PromptAssembly assemble_prompt(const RetrievalResult& result, const EmbeddingDatabase& db,
                               const SynthesisRequest& request, const TokenSource& tokens, std::uint32_t speaker_dim) {
    const auto pos = db.find(result.record_id);
    if (!pos) {
        throw Error(ErrorCode::kMissingAsset, "retrieved record '" + result.record_id + "' is not in the database");
    }
    const auto& record = db[*pos];
    PromptAssembly a;
    a.record_id = record.id;
    a.prompt_tokens = tokens.tokens_for(record);
    a.prompt_text = record.transcript;
    a.target_text = request.target_text;
    a.speaker = speaker_for_key(record.id, speaker_dim);
    return a;
}

nlohmann::json RunReport::to_json() const {
    nlohmann::json timings = nlohmann::json::object();
    for (const auto& [stage, ns] : stage_timings_ns) timings[stage] = ns;
    return {
        {"retrieved_id", retrieved_id},
        {"retrieved_emotion", retrieved_emotion},
        {"retrieved_intensity", std::string(to_string(retrieved_intensity))},
        {"similarity", similarity},
        {"method", std::string(to_string(method))},
        {"intensity", intensity ? nlohmann::json(std::string(to_string(*intensity))) : nlohmann::json(nullptr)},
        {"stage_timings_ns", timings},
        {"wall_time_ns", wall_time_ns},
        {"output_path", output_path},
        {"seed", seed},
        {"mel", {{"T", mel_frames}, {"D", mel_dim}, {"frame_rate_hz", mel_frame_rate_hz}}},
    };
}

RunReport run_inference(const SynthesisRequest& request, const InferenceAssets& assets,
                        const std::filesystem::path& output_path) {
    const auto wall_start = Clock::now();
    if (!assets.db || !assets.model || !assets.tokens || !assets.generator) {
        throw Error(ErrorCode::kInvalidArgument, "run_inference: missing assets");
    }
    if (request.target_text.empty()) throw Error(ErrorCode::kInvalidArgument, "target text must be non-empty");

    RunReport report;
    auto& timings = report.stage_timings_ns;

    const auto result = run_stage("retrieval", timings, [&] {
        return retrieve(*assets.db, assets.indices, request.reference_embedding, request.intensity, request.method);
    });
    const auto assembly = run_stage("prompt_assembly", timings, [&] {
        return assemble_prompt(result, *assets.db, request, *assets.tokens, assets.model->shape().speaker_dim);
    });
    const auto tokens = run_stage("token_generation", timings, [&] {
        auto all = assets.generator->generate(assembly, request.seed);
        const auto prompt_rows = assembly.prompt_tokens.length();
        FrameSequence continuation;
        continuation.frame_rate_hz = all.frame_rate_hz;
        continuation.frames = all.frames.bottomRows(all.length() - prompt_rows);
        return continuation;
    });
    const auto mel = run_stage("flow_matching", timings, [&] {
        return generate_mel(*assets.model, tokens, assembly.speaker, request.ode_steps, request.seed);
    });
    run_stage("output", timings, [&] {
        save_frames(mel, output_path);
        return 0;
    });

    report.retrieved_id = result.record_id;
    report.retrieved_emotion = result.emotion_label;
    report.retrieved_intensity = result.intensity;
    report.similarity = result.similarity;
    report.method = request.method;
    report.intensity = request.intensity;
    report.output_path = output_path.string();
    report.seed = request.seed;
    report.mel_frames = static_cast<std::size_t>(mel.length());
    report.mel_dim = static_cast<std::size_t>(mel.width());
    report.mel_frame_rate_hz = mel.frame_rate_hz;
    report.wall_time_ns = static_cast<std::uint64_t>(
        std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - wall_start).count());
    return report;
}

void write_token_fixtures(const EmbeddingDatabase& db, const std::filesystem::path& dir, std::uint32_t token_dim,
                          std::uint64_t seed) {
    std::filesystem::create_directories(dir);
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<Eigen::Index> length(20, 60);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (const auto& record : db.records()) {
        FrameSequence seq;
        seq.frame_rate_hz = MockTokenGenerator::kTokenRateHz;
        seq.frames.resize(length(rng), token_dim);
        for (Eigen::Index r = 0; r < seq.frames.rows(); ++r) {
            for (Eigen::Index c = 0; c < seq.frames.cols(); ++c) seq.frames(r, c) = normal(rng);
        }
        save_frames(seq, DirectoryTokenSource::file_for(dir, record.id));
    }
}

}  // namespace emorag
