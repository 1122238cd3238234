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
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "core/embedding_store.hpp"

namespace emorag {

enum class RetrievalMethod : std::uint8_t { kEmbedding = 0, kClustering = 1 };

std::string_view to_string(RetrievalMethod method);
RetrievalMethod parse_method(std::string_view text);

// Cosine of the angle between a and b, clamped to [-1, 1].
double cosine_similarity(std::span<const float> a, std::span<const float> b);

// K-means partition of a database's unit-normalized embeddings.
struct ClusterIndex {
    std::uint32_t k = 0;
    std::uint32_t dim = 0;
    std::vector<float> centroids;  // k x dim, row-major
    std::vector<std::uint32_t> assignments;
    double inertia = 0.0;
    io::Digest source_fingerprint{};

    // Inertia after each Lloyd iteration. Only populated by kmeans_fit.
    std::vector<double> inertia_history;
    std::uint32_t iterations = 0;

    // Record positions per cluster, ascending. Derived from assignments.
    std::vector<std::vector<std::uint32_t>> members;

    std::span<const float> centroid(std::size_t c) const {
        return std::span(centroids).subspan(c * dim, dim);
    }
    void rebuild_members();
};

struct KMeansOptions {
    std::uint32_t max_iters = 100;
    std::uint64_t seed = 0;
};

ClusterIndex kmeans_fit(const EmbeddingDatabase& db, std::uint32_t k, const KMeansOptions& options = {});

// Squared-Euclidean inertia of the index against the database it was built from.
double compute_inertia(const EmbeddingDatabase& db, const ClusterIndex& index);

// EMIX binary format.
inline constexpr std::uint32_t kEmixVersion = 1;
io::Bytes encode_index(const ClusterIndex& index);
// Decodes the persisted fields; inertia is left at 0 until checked against a
// database with load_index.
ClusterIndex decode_index(std::span<const std::uint8_t> bytes);
void save_index(const ClusterIndex& index, const std::filesystem::path& path);
// Loads an index and verifies it was built from `db`; raises kStaleIndex otherwise.
ClusterIndex load_index(const std::filesystem::path& path, const EmbeddingDatabase& db);

struct RetrievalResult {
    std::string record_id;
    std::size_t position = 0;  // within the searched (possibly gated) database
    double similarity = 0.0;
    RetrievalMethod method = RetrievalMethod::kEmbedding;
    IntensityLevel intensity = IntensityLevel::kNormal;
    std::string emotion_label;
    std::size_t candidates_scanned = 0;
    std::size_t centroids_compared = 0;
    bool fell_back = false;  // clustering probe hit an empty cluster
    std::uint64_t elapsed_ns = 0;
};

RetrievalResult retrieve_embedding_based(const EmbeddingDatabase& db, std::span<const float> query);
RetrievalResult retrieve_clustering_based(const EmbeddingDatabase& db, const ClusterIndex& index,
                                          std::span<const float> query);

// One full-database index plus one index per non-empty intensity subset, with
// the gated subsets cached so queries do not re-filter.
class IndexSet {
public:
    struct Level {
        std::shared_ptr<const EmbeddingDatabase> subset;
        std::optional<ClusterIndex> index;
    };

    // k == 0 selects the number of distinct emotion labels per subset.
    static IndexSet build(const EmbeddingDatabase& db, std::uint32_t k, const KMeansOptions& options,
                          std::vector<std::string>* warnings = nullptr);

    // Writes <base>.full.emix and <base>.<level>.emix for every built level.
    void save(const std::filesystem::path& base) const;
    static IndexSet load(const std::filesystem::path& base, const EmbeddingDatabase& db);

    static std::filesystem::path file_for(const std::filesystem::path& base, std::optional<IntensityLevel> level);

    const ClusterIndex* full() const { return full_ ? &*full_ : nullptr; }
    const ClusterIndex* index(IntensityLevel level) const;
    const EmbeddingDatabase& subset(IntensityLevel level) const;
    const io::Digest& source_fingerprint() const noexcept { return fingerprint_; }

private:
    io::Digest fingerprint_{};
    std::optional<ClusterIndex> full_;
    Level levels_[3];
};

// Applies the intensity gate, then dispatches to the requested strategy.
// `indices` is required for the clustering method.
RetrievalResult retrieve(const EmbeddingDatabase& db, const IndexSet* indices, std::span<const float> query,
                         std::optional<IntensityLevel> intensity, RetrievalMethod method);

}  // namespace emorag
