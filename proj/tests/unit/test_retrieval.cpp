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

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "core/error.hpp"
#include "core/retrieval.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

namespace {

using emorag::ClusterIndex;
using emorag::EmbeddingDatabase;
using emorag::Error;
using emorag::ErrorCode;
using emorag::IntensityLevel;
using emorag::RetrievalMethod;
using testing_support::make_record;

template <typename F>
ErrorCode code_of(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    return ErrorCode::kOk;
}

std::vector<std::vector<float>> rows_of(const EmbeddingDatabase& db) {
    std::vector<std::vector<float>> rows;
    for (const auto& r : db.records()) rows.push_back(r.embedding);
    return rows;
}

// Three well separated 2-D groups around the given angles.
EmbeddingDatabase three_groups(std::mt19937_64& rng, std::size_t per_group, double sigma,
                               std::vector<std::vector<double>>* means = nullptr) {
    const double angles[3] = {0.3, 2.4, 4.4};
    std::normal_distribution<double> noise(0.0, sigma);
    std::vector<emorag::UtteranceRecord> records;
    if (means) means->clear();
    for (int g = 0; g < 3; ++g) {
        const double cx = 10.0 * std::cos(angles[g]), cy = 10.0 * std::sin(angles[g]);
        if (means) means->push_back(oracle::unit({cx, cy}));
        for (std::size_t i = 0; i < per_group; ++i) {
            records.push_back(make_record("g" + std::to_string(g) + "_" + std::to_string(i), "emo" + std::to_string(g),
                                          IntensityLevel::kNormal,
                                          {static_cast<float>(cx + noise(rng)), static_cast<float>(cy + noise(rng))}));
        }
    }
    return EmbeddingDatabase(2, std::move(records));
}

TEST(Cosine, HandValues) {
    const std::vector<float> a{1, 2, 2};
    EXPECT_DOUBLE_EQ(emorag::cosine_similarity(a, a), 1.0);
    EXPECT_DOUBLE_EQ(emorag::cosine_similarity(std::vector<float>{1, 0}, std::vector<float>{0, 1}), 0.0);
    EXPECT_NEAR(emorag::cosine_similarity(std::vector<float>{1, 1}, std::vector<float>{1, 0}), 0.70710678, 1e-6);
    EXPECT_EQ(code_of([] { emorag::cosine_similarity(std::vector<float>{1, 1}, std::vector<float>{1}); }),
              ErrorCode::kDimensionMismatch);
    EXPECT_EQ(code_of([] { emorag::cosine_similarity(std::vector<float>{0, 0}, std::vector<float>{1, 0}); }),
              ErrorCode::kZeroNorm);
}

TEST(EmbeddingRetrieval, Singleton) {
    EmbeddingDatabase db(3, {make_record("only", "x", IntensityLevel::kWeak, {1, 2, 3})});
    const std::vector<float> q{3, 2, 1};
    const auto r = emorag::retrieve_embedding_based(db, q);
    EXPECT_EQ(r.record_id, "only");
    EXPECT_DOUBLE_EQ(r.similarity, emorag::cosine_similarity(q, db[0].embedding));
    EXPECT_EQ(r.candidates_scanned, 1u);
}

TEST(EmbeddingRetrieval, ExactMatchHasSimilarityOne) {
    std::mt19937_64 rng(1);
    const auto db = testing_support::random_db(rng, 16, 50);
    for (std::size_t i : {0u, 17u, 49u}) {
        const auto r = emorag::retrieve_embedding_based(db, db[i].embedding);
        EXPECT_EQ(r.record_id, db[i].id);
        EXPECT_NEAR(r.similarity, 1.0, 1e-12);
        EXPECT_EQ(r.candidates_scanned, db.size());
    }
}

TEST(EmbeddingRetrieval, AgreesWithBruteForceOracle) {
    std::mt19937_64 rng(2);
    std::normal_distribution<float> gauss;
    for (int trial = 0; trial < 50; ++trial) {
        const auto db = testing_support::random_db(rng, 2 + trial % 9, 1 + trial * 3);
        std::vector<float> q(db.dim());
        for (auto& v : q) v = gauss(rng);
        EXPECT_EQ(emorag::retrieve_embedding_based(db, q).position, oracle::cosine_argmax(rows_of(db), q));
    }
}

TEST(EmbeddingRetrieval, QueryAtClusterCenterReturnsThatLabel) {
    std::mt19937_64 rng(3);
    std::vector<std::vector<double>> means;
    const auto db = three_groups(rng, 30, 0.2, &means);
    for (int g = 0; g < 3; ++g) {
        const std::vector<float> q{static_cast<float>(means[g][0]), static_cast<float>(means[g][1])};
        const auto r = emorag::retrieve_embedding_based(db, q);
        EXPECT_EQ(r.emotion_label, "emo" + std::to_string(g));
        EXPECT_EQ(r.position, oracle::cosine_argmax(rows_of(db), q));
    }
}

TEST(EmbeddingRetrieval, RejectsBadQueries) {
    EmbeddingDatabase db(2, {make_record("a", "x", IntensityLevel::kWeak, {1, 0})});
    EXPECT_EQ(code_of([&] { emorag::retrieve_embedding_based(db, std::vector<float>{1, 0, 0}); }),
              ErrorCode::kDimensionMismatch);
    EXPECT_EQ(code_of([&] { emorag::retrieve_embedding_based(db, std::vector<float>{0, 0}); }), ErrorCode::kZeroNorm);
    EXPECT_EQ(code_of([&] { emorag::retrieve_embedding_based(db, std::vector<float>{NAN, 0}); }),
              ErrorCode::kNonFinite);
    EXPECT_EQ(code_of([] { emorag::retrieve_embedding_based(EmbeddingDatabase(2, {}), std::vector<float>{1, 0}); }),
              ErrorCode::kNoCandidates);
}

TEST(KMeans, SingleClusterIsNormalizedMean) {
    std::mt19937_64 rng(4);
    const auto db = testing_support::random_db(rng, 5, 40);
    const auto index = emorag::kmeans_fit(db, 1);
    std::vector<double> mean(5, 0.0);
    for (const auto& r : db.records()) {
        std::vector<double> v(r.embedding.begin(), r.embedding.end());
        const auto u = oracle::unit(v);
        for (int d = 0; d < 5; ++d) mean[d] += u[d];
    }
    const auto expect = oracle::unit(mean);
    for (int d = 0; d < 5; ++d) EXPECT_NEAR(index.centroids[d], expect[d], 1e-6);
    for (auto a : index.assignments) EXPECT_EQ(a, 0u);
}

TEST(KMeans, TwoGroupsRecoverAxisCentroids) {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> jitter(0.0, 0.01);
    std::vector<emorag::UtteranceRecord> records;
    std::vector<std::vector<double>> points;
    for (int i = 0; i < 40; ++i) {
        const double x = (i % 2 ? 10.0 : -10.0) + jitter(rng), y = jitter(rng);
        points.push_back({x, y});
        records.push_back(make_record("p" + std::to_string(i), "e", IntensityLevel::kNormal,
                                      {static_cast<float>(x), static_cast<float>(y)}));
    }
    const EmbeddingDatabase db(2, std::move(records));
    const auto index = emorag::kmeans_fit(db, 2, {100, 9});
    const auto ref = oracle::lloyd(points, {{0.6, 0.8}, {-0.6, 0.8}}, 50);
    for (std::uint32_t c = 0; c < 2; ++c) {
        const auto cen = index.centroid(c);
        const double target = cen[0] > 0 ? 1.0 : -1.0;
        EXPECT_NEAR(cen[0], target, 0.05);
        EXPECT_NEAR(cen[1], 0.0, 0.05);
        // The oracle run from a different start lands on the same pair.
        const bool match0 = std::abs(ref[0][0] - cen[0]) < 1e-4 && std::abs(ref[0][1] - cen[1]) < 1e-4;
        const bool match1 = std::abs(ref[1][0] - cen[0]) < 1e-4 && std::abs(ref[1][1] - cen[1]) < 1e-4;
        EXPECT_TRUE(match0 || match1);
    }
}

TEST(KMeans, KEqualsNIsDegenerate) {
    std::mt19937_64 rng(6);
    const auto db = testing_support::random_db(rng, 3, 12);
    const auto index = emorag::kmeans_fit(db, 12);
    EXPECT_LE(index.inertia, 1e-9);
    std::vector<int> seen(12, 0);
    for (auto a : index.assignments) ++seen[a];
    for (int s : seen) EXPECT_EQ(s, 1);
}

TEST(KMeans, InvariantsOnRandomData) {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const auto db = testing_support::random_db(rng, 2 + trial % 6, 20 + trial * 5);
        const auto index = emorag::kmeans_fit(db, 1 + trial % 5, {100, static_cast<std::uint64_t>(trial)});
        ASSERT_EQ(index.assignments.size(), db.size());
        for (std::size_t i = 1; i < index.inertia_history.size(); ++i) {
            EXPECT_LE(index.inertia_history[i], index.inertia_history[i - 1] + 1e-12);
        }
        for (std::uint32_t c = 0; c < index.k; ++c) {
            if (index.members[c].empty()) continue;
            double n = 0;
            for (float v : index.centroid(c)) n += static_cast<double>(v) * v;
            EXPECT_NEAR(std::sqrt(n), 1.0, 1e-6);
        }
        // Every assignment is a nearest stored centroid.
        for (std::size_t i = 0; i < db.size(); ++i) {
            std::vector<double> u(db[i].embedding.begin(), db[i].embedding.end());
            u = oracle::unit(u);
            double best = INFINITY, mine = 0;
            for (std::uint32_t c = 0; c < index.k; ++c) {
                double d = 0;
                for (std::size_t j = 0; j < u.size(); ++j) d += std::pow(u[j] - index.centroid(c)[j], 2);
                best = std::min(best, d);
                if (c == index.assignments[i]) mine = d;
            }
            EXPECT_LE(mine, best + 1e-9);
        }
        EXPECT_NEAR(index.inertia, emorag::compute_inertia(db, index), 1e-9);
    }
}

TEST(KMeans, SameSeedIsDeterministic) {
    std::mt19937_64 rng(8);
    const auto db = testing_support::random_db(rng, 8, 100);
    const auto a = emorag::kmeans_fit(db, 4, {100, 3});
    const auto b = emorag::kmeans_fit(db, 4, {100, 3});
    EXPECT_EQ(a.centroids, b.centroids);
    EXPECT_EQ(a.assignments, b.assignments);
}

TEST(KMeans, RejectsBadK) {
    std::mt19937_64 rng(9);
    const auto db = testing_support::random_db(rng, 3, 5);
    EXPECT_EQ(code_of([&] { emorag::kmeans_fit(db, 0); }), ErrorCode::kInvalidArgument);
    EXPECT_EQ(code_of([&] { emorag::kmeans_fit(db, 6); }), ErrorCode::kInvalidArgument);
}

TEST(ClusteringRetrieval, SingleClusterMatchesEmbedding) {
    std::mt19937_64 rng(10);
    std::normal_distribution<float> gauss;
    const auto db = testing_support::random_db(rng, 12, 200);
    const auto index = emorag::kmeans_fit(db, 1);
    for (int q = 0; q < 50; ++q) {
        std::vector<float> query(12);
        for (auto& v : query) v = gauss(rng);
        EXPECT_EQ(emorag::retrieve_clustering_based(db, index, query).record_id,
                  emorag::retrieve_embedding_based(db, query).record_id);
    }
}

TEST(ClusteringRetrieval, CentroidQueryReturnsBestWithinCluster) {
    std::mt19937_64 rng(11);
    const auto db = three_groups(rng, 40, 0.3);
    const auto index = emorag::kmeans_fit(db, 3, {100, 1});
    for (std::uint32_t c = 0; c < 3; ++c) {
        const std::vector<float> q(index.centroid(c).begin(), index.centroid(c).end());
        std::vector<std::vector<float>> rows;
        std::vector<std::size_t> positions;
        for (std::size_t i = 0; i < db.size(); ++i) {
            if (index.assignments[i] == c) {
                rows.push_back(db[i].embedding);
                positions.push_back(i);
            }
        }
        const auto r = emorag::retrieve_clustering_based(db, index, q);
        EXPECT_EQ(r.position, positions[oracle::cosine_argmax(rows, q)]);
        EXPECT_EQ(r.candidates_scanned, rows.size());
        EXPECT_LT(r.candidates_scanned, db.size());
    }
}

TEST(ClusteringRetrieval, TieGoesToLowerCentroidIndex) {
    EmbeddingDatabase db(2, {make_record("a", "x", IntensityLevel::kNormal, {1, 0}),
                             make_record("b", "y", IntensityLevel::kNormal, {0, 1})});
    ClusterIndex index;
    index.k = 2;
    index.dim = 2;
    index.centroids = {1, 0, 0, 1};
    index.assignments = {0, 1};
    index.source_fingerprint = db.fingerprint();
    index.rebuild_members();
    const auto r = emorag::retrieve_clustering_based(db, index, std::vector<float>{1, 1});
    EXPECT_EQ(r.record_id, "a");
    EXPECT_EQ(r.candidates_scanned, 1u);

    // Swapping the centroid order flips the winner, so the rule is index based.
    index.centroids = {0, 1, 1, 0};
    index.assignments = {1, 0};
    index.rebuild_members();
    EXPECT_EQ(emorag::retrieve_clustering_based(db, index, std::vector<float>{1, 1}).record_id, "b");
}

TEST(ClusteringRetrieval, EmptyClusterFallsBackToFullScan) {
    EmbeddingDatabase db(2, {make_record("a", "x", IntensityLevel::kNormal, {1, 0}),
                             make_record("b", "y", IntensityLevel::kNormal, {1, 0.2f})});
    ClusterIndex index;
    index.k = 2;
    index.dim = 2;
    index.centroids = {0, 1, 1, 0};
    index.assignments = {1, 1};
    index.source_fingerprint = db.fingerprint();
    index.rebuild_members();
    const auto r = emorag::retrieve_clustering_based(db, index, std::vector<float>{0.1f, 1.0f});
    EXPECT_TRUE(r.fell_back);
    EXPECT_EQ(r.candidates_scanned, 2u);
    EXPECT_EQ(r.record_id, "b");
}

TEST(ClusteringRetrieval, StaleIndexIsRejected) {
    std::mt19937_64 rng(12);
    const auto db = testing_support::random_db(rng, 4, 20);
    const auto other = testing_support::random_db(rng, 4, 20);
    const auto index = emorag::kmeans_fit(db, 2);
    EXPECT_EQ(code_of([&] { emorag::retrieve_clustering_based(other, index, db[0].embedding); }),
              ErrorCode::kStaleIndex);
}

TEST(IndexFile, RoundTripAndStaleDetection) {
    std::mt19937_64 rng(13);
    testing_support::TempDir dir;
    const auto db = testing_support::random_db(rng, 6, 60);
    const auto index = emorag::kmeans_fit(db, 3);
    emorag::save_index(index, dir / "i.emix");
    const auto back = emorag::load_index(dir / "i.emix", db);
    EXPECT_EQ(back.centroids, index.centroids);
    EXPECT_EQ(back.assignments, index.assignments);
    EXPECT_EQ(back.source_fingerprint, index.source_fingerprint);
    EXPECT_DOUBLE_EQ(back.inertia, index.inertia);
    EXPECT_EQ(emorag::encode_index(back), emorag::io::read_file(dir / "i.emix"));

    const auto other = testing_support::random_db(rng, 6, 60);
    EXPECT_EQ(code_of([&] { emorag::load_index(dir / "i.emix", other); }), ErrorCode::kStaleIndex);
}

TEST(Gated, StrongEmbeddingMatchesFilteredOracle) {
    std::mt19937_64 rng(14);
    std::normal_distribution<float> gauss;
    const auto db = testing_support::random_db(rng, 8, 150);
    const auto strong = emorag::filter_by_intensity(db, IntensityLevel::kStrong);
    for (int q = 0; q < 30; ++q) {
        std::vector<float> query(8);
        for (auto& v : query) v = gauss(rng);
        const auto r = emorag::retrieve(db, nullptr, query, IntensityLevel::kStrong, RetrievalMethod::kEmbedding);
        EXPECT_EQ(r.intensity, IntensityLevel::kStrong);
        EXPECT_EQ(r.record_id, strong[oracle::cosine_argmax(rows_of(strong), query)].id);
        EXPECT_EQ(r.candidates_scanned, strong.size());
    }
}

TEST(Gated, UngatedEmbeddingIsPlainScan) {
    std::mt19937_64 rng(15);
    const auto db = testing_support::random_db(rng, 8, 50);
    const auto a = emorag::retrieve(db, nullptr, db[3].embedding, std::nullopt, RetrievalMethod::kEmbedding);
    const auto b = emorag::retrieve_embedding_based(db, db[3].embedding);
    EXPECT_EQ(a.record_id, b.record_id);
    EXPECT_EQ(a.similarity, b.similarity);
}

TEST(Gated, EmptySubsetAndMissingIndex) {
    EmbeddingDatabase db(2, {make_record("a", "x", IntensityLevel::kWeak, {1, 0}),
                             make_record("b", "y", IntensityLevel::kNormal, {0, 1})});
    const std::vector<float> q{1, 1};
    EXPECT_EQ(code_of([&] { emorag::retrieve(db, nullptr, q, IntensityLevel::kStrong, RetrievalMethod::kEmbedding); }),
              ErrorCode::kEmptySubset);
    EXPECT_EQ(code_of([&] { emorag::retrieve(db, nullptr, q, std::nullopt, RetrievalMethod::kClustering); }),
              ErrorCode::kInvalidArgument);

    std::vector<std::string> warnings;
    const auto set = emorag::IndexSet::build(db, 1, {}, &warnings);
    EXPECT_EQ(set.index(IntensityLevel::kStrong), nullptr);
    EXPECT_FALSE(warnings.empty());
    EXPECT_EQ(code_of([&] { emorag::retrieve(db, &set, q, IntensityLevel::kStrong, RetrievalMethod::kClustering); }),
              ErrorCode::kEmptySubset);
    const auto r = emorag::retrieve(db, &set, q, IntensityLevel::kWeak, RetrievalMethod::kClustering);
    EXPECT_EQ(r.record_id, "a");
}

TEST(IndexSetFiles, SaveLoadPerLevel) {
    std::mt19937_64 rng(16);
    testing_support::TempDir dir;
    const auto db = testing_support::random_db(rng, 5, 90);
    const auto set = emorag::IndexSet::build(db, 0, {50, 2});
    set.save(dir / "idx");
    EXPECT_TRUE(std::filesystem::exists(emorag::IndexSet::file_for(dir / "idx", std::nullopt)));
    for (auto level : emorag::kAllIntensityLevels) {
        EXPECT_TRUE(std::filesystem::exists(emorag::IndexSet::file_for(dir / "idx", level)));
    }
    const auto back = emorag::IndexSet::load(dir / "idx", db);
    EXPECT_EQ(back.full()->centroids, set.full()->centroids);
    EXPECT_EQ(back.full()->k, static_cast<std::uint32_t>(db.labels().size()));
    for (auto level : emorag::kAllIntensityLevels) {
        EXPECT_EQ(back.index(level)->assignments, set.index(level)->assignments);
        const auto q = db[7].embedding;
        EXPECT_EQ(emorag::retrieve(db, &back, q, level, RetrievalMethod::kClustering).record_id,
                  emorag::retrieve(db, &set, q, level, RetrievalMethod::kClustering).record_id);
    }
}

}  // namespace
