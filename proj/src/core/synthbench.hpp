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

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "core/embedding_store.hpp"
#include "core/retrieval.hpp"

namespace emorag {

struct SyntheticDatasetConfig {
    std::uint32_t num_emotions = 8;
    std::uint32_t dim = EmbeddingDatabase::kDefaultDim;
    std::uint32_t records_per_emotion = 375;
    double cluster_sigma = 0.1;
    double center_spread = 1.0;
    std::array<double, 3> intensity_mix{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};  // weak, normal, strong
    std::uint64_t seed = 0;

    void validate() const;
};

std::string emotion_name(std::uint32_t cluster);

// Cluster centers of the synthetic mixture, one per row (num_emotions x dim).
// They depend only on (num_emotions, dim, center_spread, seed).
std::vector<std::vector<double>> mixture_centers(const SyntheticDatasetConfig& config);

// Smallest pairwise center distance divided by cluster_sigma.
double center_separation_in_sigmas(const SyntheticDatasetConfig& config);

EmbeddingDatabase generate_synthetic_db(const SyntheticDatasetConfig& config);

struct LabeledQuery {
    EmotionEmbedding embedding;
    std::string label;
};

// Fresh draws from the same mixture (clusters chosen round-robin), independent
// of the database records.
std::vector<LabeledQuery> generate_queries(const SyntheticDatasetConfig& config, std::size_t count,
                                           std::uint64_t seed);

struct QueryLog {
    std::size_t candidates_scanned = 0;
    std::uint64_t elapsed_ns = 0;
    bool matched = false;
};

double measure_accuracy(const EmbeddingDatabase& db, const IndexSet* indices, RetrievalMethod method,
                        const std::vector<LabeledQuery>& queries, std::vector<QueryLog>* logs = nullptr);

struct BenchResult {
    RetrievalMethod method = RetrievalMethod::kEmbedding;
    std::size_t db_size = 0;
    double accuracy = 0.0;
    std::uint64_t mean_latency_ns = 0;
    std::uint64_t p95_latency_ns = 0;
    std::size_t queries = 0;
    double mean_candidates_scanned = 0.0;

    friend bool operator==(const BenchResult&, const BenchResult&) = default;
};

struct BenchCell {
    RetrievalMethod method;
    std::size_t db_size;
};

struct BenchOptions {
    SyntheticDatasetConfig dataset;  // records_per_emotion is derived from each cell's db_size
    std::size_t queries = 1000;
    std::size_t warmup = 10;
    std::uint32_t k = 0;  // 0: one cluster per emotion label
    std::uint32_t kmeans_max_iters = 100;
    bool parallel = false;
};

// Cells run in the given order. Accuracy is deterministic under dataset.seed;
// latency is measured per query over retrieval only.
std::vector<BenchResult> run_benchmark(const std::vector<BenchCell>& cells, const BenchOptions& options);

enum class ReportFormat { kCsv, kJson };
ReportFormat parse_report_format(std::string_view text);

void emit_report(const std::vector<BenchResult>& results, const std::filesystem::path& path, ReportFormat format);
std::vector<BenchResult> read_report_json(const std::filesystem::path& path);

}  // namespace emorag
