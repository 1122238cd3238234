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

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "core/embedding_store.hpp"

namespace testing_support {

// Creates a fresh directory under the system temp dir and removes it on exit.
class TempDir {
public:
    explicit TempDir(const std::string& tag = "emorag") {
        static std::atomic<int> counter{0};
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                (tag + "-" + std::to_string(rd()) + "-" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline emorag::UtteranceRecord make_record(std::string id, std::string label, emorag::IntensityLevel level,
                                           std::vector<float> embedding) {
    emorag::UtteranceRecord r;
    r.id = std::move(id);
    r.emotion_label = std::move(label);
    r.intensity = level;
    r.embedding = std::move(embedding);
    r.transcript = "transcript of " + r.id;
    return r;
}

// Random database with Gaussian embeddings, random labels, levels, optional
// audio refs and some non-ASCII transcripts.
inline emorag::EmbeddingDatabase random_db(std::mt19937_64& rng, std::uint32_t dim, std::size_t n) {
    std::normal_distribution<float> gauss(0.0f, 1.0f);
    std::uniform_int_distribution<int> label(0, 5);
    std::uniform_int_distribution<int> level(0, 2);
    std::bernoulli_distribution coin(0.5);
    std::vector<emorag::UtteranceRecord> records;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<float> e(dim);
        do {
            for (auto& v : e) v = gauss(rng);
        } while (std::all_of(e.begin(), e.end(), [](float v) { return v == 0.0f; }));
        auto r = make_record("r" + std::to_string(i), "emo" + std::to_string(label(rng)),
                             static_cast<emorag::IntensityLevel>(level(rng)), std::move(e));
        if (coin(rng)) r.transcript = "h\xC3\xA9llo " + std::to_string(i);
        if (coin(rng)) r.audio_ref = "audio/" + r.id + ".wav";
        records.push_back(std::move(r));
    }
    return emorag::EmbeddingDatabase(dim, std::move(records));
}

}  // namespace testing_support
