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

#include "core/retrieval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <random>

namespace emorag {
namespace {

using Clock = std::chrono::steady_clock;

std::uint64_t nanos_since(Clock::time_point start) {
    return static_cast<std::uint64_t>(
        std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - start).count());
}

struct CosineTerms {
    double dot = 0.0;
    double aa = 0.0;
    double bb = 0.0;
};

inline CosineTerms cosine_terms(const float* a, const float* b, std::size_t n) {
    CosineTerms t;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = a[i];
        const double y = b[i];
        t.dot += x * y;
        t.aa += x * x;
        t.bb += y * y;
    }
    return t;
}

inline double cosine_from(const CosineTerms& t) {
    const double c = t.dot / std::sqrt(t.aa * t.bb);
    return std::clamp(c, -1.0, 1.0);
}

void check_query(const EmbeddingDatabase& db, std::span<const float> query) {
    if (query.size() != db.dim()) {
        throw Error(ErrorCode::kDimensionMismatch, "query has dim " + std::to_string(query.size()) +
                                                       ", database dim is " + std::to_string(db.dim()));
    }
    double sq = 0.0;
    for (float x : query) {
        if (!std::isfinite(x)) throw Error(ErrorCode::kNonFinite, "query embedding has a non-finite value");
        sq += static_cast<double>(x) * x;
    }
    if (sq == 0.0) throw Error(ErrorCode::kZeroNorm, "query embedding has zero norm");
}

// Cosine argmax over the given record positions; first maximum wins.
// Zero-norm records never win.
template <typename Positions>
std::pair<std::size_t, double> scan_argmax(const EmbeddingDatabase& db, std::span<const float> query,
                                           const Positions& positions) {
    std::size_t best = std::numeric_limits<std::size_t>::max();
    double best_sim = -std::numeric_limits<double>::infinity();
    const std::size_t dim = db.dim();
    for (auto p : positions) {
        const auto& e = db[p].embedding;
        const auto terms = cosine_terms(query.data(), e.data(), dim);
        if (terms.bb == 0.0) continue;
        const double sim = cosine_from(terms);
        if (sim > best_sim) {
            best_sim = sim;
            best = p;
        }
    }
    return {best, best_sim};
}

struct AllPositions {
    std::size_t n;
    struct It {
        std::size_t i;
        std::size_t operator*() const { return i; }
        It& operator++() { ++i; return *this; }
        bool operator!=(const It& o) const { return i != o.i; }
    };
    It begin() const { return {0}; }
    It end() const { return {n}; }
};

RetrievalResult make_result(const EmbeddingDatabase& db, std::size_t position, double similarity,
                            RetrievalMethod method) {
    if (position >= db.size()) {
        throw Error(ErrorCode::kNoCandidates, "no candidate with a non-zero embedding");
    }
    const auto& rec = db[position];
    RetrievalResult r;
    r.record_id = rec.id;
    r.position = position;
    r.similarity = similarity;
    r.method = method;
    r.intensity = rec.intensity;
    r.emotion_label = rec.emotion_label;
    return r;
}

std::vector<double> normalized_rows(const EmbeddingDatabase& db) {
    const std::size_t dim = db.dim();
    std::vector<double> rows(db.size() * dim);
    for (std::size_t i = 0; i < db.size(); ++i) {
        const auto& e = db[i].embedding;
        double sq = 0.0;
        for (float x : e) sq += static_cast<double>(x) * x;
        if (sq == 0.0) {
            throw Error(ErrorCode::kZeroNorm, "record '" + db[i].id + "' has a zero-norm embedding");
        }
        const double inv = 1.0 / std::sqrt(sq);
        for (std::size_t d = 0; d < dim; ++d) rows[i * dim + d] = e[d] * inv;
    }
    return rows;
}

template <typename T>
double squared_distance(const double* x, const T* c, std::size_t dim) {
    double s = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
        const double diff = x[d] - static_cast<double>(c[d]);
        s += diff * diff;
    }
    return s;
}

// Nearest centroid with lowest-index tie-breaking. Returns (cluster, distance).
template <typename T>
std::pair<std::uint32_t, double> nearest_centroid(const double* x, const std::vector<T>& centroids,
                                                  std::uint32_t k, std::size_t dim) {
    std::uint32_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::uint32_t c = 0; c < k; ++c) {
        const double d = squared_distance(x, centroids.data() + c * dim, dim);
        if (d < best_d) {
            best_d = d;
            best = c;
        }
    }
    return {best, best_d};
}

// k-means++ seeding over normalized rows.
std::vector<double> seed_plus_plus(const std::vector<double>& rows, std::size_t n, std::size_t dim,
                                   std::uint32_t k, std::mt19937_64& rng) {
    std::vector<double> centroids(std::size_t{k} * dim);
    std::vector<double> d2(n, std::numeric_limits<double>::infinity());
    std::vector<bool> chosen(n, false);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    auto take = [&](std::size_t idx, std::uint32_t c) {
        chosen[idx] = true;
        std::copy_n(rows.begin() + static_cast<std::ptrdiff_t>(idx * dim), dim,
                    centroids.begin() + static_cast<std::ptrdiff_t>(std::size_t{c} * dim));
        for (std::size_t i = 0; i < n; ++i) {
            d2[i] = std::min(d2[i], squared_distance(&rows[i * dim], &centroids[std::size_t{c} * dim], dim));
        }
    };

    std::uniform_int_distribution<std::size_t> first(0, n - 1);
    take(first(rng), 0);
    for (std::uint32_t c = 1; c < k; ++c) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (!chosen[i]) total += d2[i];
        }
        std::size_t pick = n;
        if (total > 0.0) {
            const double target = unit(rng) * total;
            double acc = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (chosen[i] || d2[i] == 0.0) continue;
                acc += d2[i];
                pick = i;
                if (acc > target) break;
            }
        }
        if (pick == n) {
            // Every remaining point coincides with a chosen centroid.
            pick = static_cast<std::size_t>(std::find(chosen.begin(), chosen.end(), false) - chosen.begin());
        }
        take(pick, c);
    }
    return centroids;
}

template <typename T>
double inertia_of(const std::vector<double>& rows, std::size_t dim, const std::vector<T>& centroids,
                  const std::vector<std::uint32_t>& assignments) {
    double total = 0.0;
    for (std::size_t i = 0; i < assignments.size(); ++i) {
        total += squared_distance(&rows[i * dim], centroids.data() + std::size_t{assignments[i]} * dim, dim);
    }
    return total;
}

}  // namespace

std::string_view to_string(RetrievalMethod method) {
    return method == RetrievalMethod::kEmbedding ? "embedding" : "clustering";
}

RetrievalMethod parse_method(std::string_view text) {
    if (text == "embedding") return RetrievalMethod::kEmbedding;
    if (text == "clustering") return RetrievalMethod::kClustering;
    throw Error(ErrorCode::kInvalidArgument,
                "unknown retrieval method '" + std::string(text) + "' (expected embedding or clustering)");
}

double cosine_similarity(std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size()) {
        throw Error(ErrorCode::kDimensionMismatch, "cosine_similarity: dims " + std::to_string(a.size()) +
                                                       " and " + std::to_string(b.size()) + " differ");
    }
    const auto t = cosine_terms(a.data(), b.data(), a.size());
    if (t.aa == 0.0 || t.bb == 0.0) throw Error(ErrorCode::kZeroNorm, "cosine_similarity: zero-norm operand");
    return cosine_from(t);
}

void ClusterIndex::rebuild_members() {
    members.assign(k, {});
    for (std::size_t i = 0; i < assignments.size(); ++i) {
        members[assignments[i]].push_back(static_cast<std::uint32_t>(i));
    }
}

ClusterIndex kmeans_fit(const EmbeddingDatabase& db, std::uint32_t k, const KMeansOptions& options) {
    if (db.empty()) throw Error(ErrorCode::kNoCandidates, "kmeans_fit: database is empty");
    if (k == 0) throw Error(ErrorCode::kInvalidArgument, "kmeans_fit: k must be positive");
    if (k > db.size()) {
        throw Error(ErrorCode::kInvalidArgument, "kmeans_fit: k=" + std::to_string(k) + " exceeds record count " +
                                                     std::to_string(db.size()));
    }
    const std::size_t n = db.size();
    const std::size_t dim = db.dim();
    const auto rows = normalized_rows(db);

    std::mt19937_64 rng(options.seed);
    auto centroids = seed_plus_plus(rows, n, dim, k, rng);

    ClusterIndex index;
    index.k = k;
    index.dim = db.dim();
    index.source_fingerprint = db.fingerprint();

    std::vector<std::uint32_t> assign(n, 0);
    std::vector<double> dist(n, 0.0);
    std::vector<double> sums(std::size_t{k} * dim);
    std::vector<std::size_t> counts(k);

    for (std::uint32_t iter = 0; iter < std::max<std::uint32_t>(options.max_iters, 1); ++iter) {
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            const auto [c, d] = nearest_centroid(&rows[i * dim], centroids, k, dim);
            changed |= (iter == 0 || c != assign[i]);
            assign[i] = c;
            dist[i] = d;
        }
        if (!changed) break;
        index.iterations = iter + 1;

        std::fill(sums.begin(), sums.end(), 0.0);
        std::fill(counts.begin(), counts.end(), 0);
        for (std::size_t i = 0; i < n; ++i) {
            ++counts[assign[i]];
            for (std::size_t d = 0; d < dim; ++d) sums[assign[i] * dim + d] += rows[i * dim + d];
        }
        std::vector<bool> taken(n, false);
        for (std::uint32_t c = 0; c < k; ++c) {
            double* centroid = &centroids[std::size_t{c} * dim];
            if (counts[c] == 0) {
                // Reseed at the point farthest from its current centroid.
                std::size_t far = n;
                for (std::size_t i = 0; i < n; ++i) {
                    if (!taken[i] && (far == n || dist[i] > dist[far])) far = i;
                }
                taken[far] = true;
                dist[far] = 0.0;
                std::copy_n(&rows[far * dim], dim, centroid);
                continue;
            }
            double sq = 0.0;
            for (std::size_t d = 0; d < dim; ++d) sq += sums[c * dim + d] * sums[c * dim + d];
            if (sq == 0.0) continue;  // members cancel out; keep the previous centroid
            const double inv = 1.0 / std::sqrt(sq);
            for (std::size_t d = 0; d < dim; ++d) centroid[d] = sums[c * dim + d] * inv;
        }
        index.inertia_history.push_back(inertia_of(rows, dim, centroids, assign));
    }

    // Persisted centroids are f32; assignments are taken against those.
    index.centroids.assign(centroids.begin(), centroids.end());
    index.assignments.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        index.assignments[i] = nearest_centroid(&rows[i * dim], index.centroids, k, dim).first;
    }
    index.inertia = inertia_of(rows, dim, index.centroids, index.assignments);
    index.rebuild_members();
    return index;
}

double compute_inertia(const EmbeddingDatabase& db, const ClusterIndex& index) {
    if (index.assignments.size() != db.size() || index.dim != db.dim()) {
        throw Error(ErrorCode::kStaleIndex, "index shape does not match the database");
    }
    return inertia_of(normalized_rows(db), db.dim(), index.centroids, index.assignments);
}

io::Bytes encode_index(const ClusterIndex& index) {
    io::ByteWriter w;
    w.raw(std::string_view("EMIX", 4));
    w.u32(kEmixVersion);
    w.u32(index.k);
    w.u32(index.dim);
    for (float x : index.centroids) w.f32(x);
    w.u32(static_cast<std::uint32_t>(index.assignments.size()));
    for (auto a : index.assignments) w.u32(a);
    w.raw(index.source_fingerprint);
    return w.take();
}

ClusterIndex decode_index(std::span<const std::uint8_t> bytes) {
    io::ByteReader r(bytes, "EMIX");
    const auto magic = r.raw(4);
    if (std::string_view(reinterpret_cast<const char*>(magic.data()), 4) != "EMIX") {
        throw Error(ErrorCode::kMalformedHeader, "not an EMIX file (bad magic)");
    }
    const auto version = r.u32();
    if (version != kEmixVersion) {
        throw Error(ErrorCode::kMalformedHeader, "unsupported EMIX version " + std::to_string(version));
    }
    ClusterIndex index;
    index.k = r.u32();
    index.dim = r.u32();
    if (index.k == 0 || index.dim == 0) throw Error(ErrorCode::kMalformedHeader, "EMIX header has k or dim 0");
    const std::size_t nc = std::size_t{index.k} * index.dim;
    if (r.remaining() < nc * 4) throw Error(ErrorCode::kMalformedHeader, "EMIX centroid block truncated");
    index.centroids.resize(nc);
    for (auto& x : index.centroids) {
        x = r.f32();
        if (!std::isfinite(x)) throw Error(ErrorCode::kNonFinite, "EMIX centroid has a non-finite value");
    }
    const auto count = r.u32();
    if (r.remaining() < std::size_t{count} * 4) throw Error(ErrorCode::kMalformedHeader, "EMIX assignments truncated");
    index.assignments.resize(count);
    for (auto& a : index.assignments) {
        a = r.u32();
        if (a >= index.k) throw Error(ErrorCode::kMalformedHeader, "EMIX assignment out of range");
    }
    const auto fp = r.raw(32);
    std::copy(fp.begin(), fp.end(), index.source_fingerprint.begin());
    if (!r.at_end()) throw Error(ErrorCode::kMalformedHeader, "trailing bytes after EMIX fingerprint");
    index.rebuild_members();
    return index;
}

void save_index(const ClusterIndex& index, const std::filesystem::path& path) {
    io::write_file_atomic(path, encode_index(index));
}

ClusterIndex load_index(const std::filesystem::path& path, const EmbeddingDatabase& db) {
    auto index = decode_index(io::read_file(path));
    if (index.source_fingerprint != db.fingerprint()) {
        throw Error(ErrorCode::kStaleIndex, "index '" + path.string() + "' was built from a different database");
    }
    index.inertia = compute_inertia(db, index);
    return index;
}

RetrievalResult retrieve_embedding_based(const EmbeddingDatabase& db, std::span<const float> query) {
    const auto start = Clock::now();
    if (db.empty()) throw Error(ErrorCode::kNoCandidates, "no candidates: database is empty");
    check_query(db, query);
    const auto [best, sim] = scan_argmax(db, query, AllPositions{db.size()});
    auto r = make_result(db, best, sim, RetrievalMethod::kEmbedding);
    r.candidates_scanned = db.size();
    r.elapsed_ns = nanos_since(start);
    return r;
}

RetrievalResult retrieve_clustering_based(const EmbeddingDatabase& db, const ClusterIndex& index,
                                          std::span<const float> query) {
    const auto start = Clock::now();
    if (db.empty()) throw Error(ErrorCode::kNoCandidates, "no candidates: database is empty");
    if (index.source_fingerprint != db.fingerprint() || index.assignments.size() != db.size()) {
        throw Error(ErrorCode::kStaleIndex, "cluster index was built from a different database");
    }
    check_query(db, query);

    const std::size_t dim = db.dim();
    double sq = 0.0;
    for (float x : query) sq += static_cast<double>(x) * x;
    const double inv = 1.0 / std::sqrt(sq);
    std::vector<double> q(dim);
    for (std::size_t d = 0; d < dim; ++d) q[d] = query[d] * inv;
    const auto cluster = nearest_centroid(q.data(), index.centroids, index.k, dim).first;

    const auto& members = index.members[cluster];
    std::pair<std::size_t, double> best;
    bool fell_back = members.empty();
    if (!fell_back) {
        best = scan_argmax(db, query, members);
        fell_back = best.first >= db.size();
    }
    if (fell_back) best = scan_argmax(db, query, AllPositions{db.size()});

    auto r = make_result(db, best.first, best.second, RetrievalMethod::kClustering);
    r.candidates_scanned = fell_back ? db.size() : members.size();
    r.centroids_compared = index.k;
    r.fell_back = fell_back;
    r.elapsed_ns = nanos_since(start);
    return r;
}

IndexSet IndexSet::build(const EmbeddingDatabase& db, std::uint32_t k, const KMeansOptions& options,
                         std::vector<std::string>* warnings) {
    IndexSet set;
    set.fingerprint_ = db.fingerprint();
    auto fit = [&](const EmbeddingDatabase& subset, std::string_view what) {
        const auto kk = k != 0 ? k : static_cast<std::uint32_t>(subset.labels().size());
        if (kk > subset.size()) {
            throw Error(ErrorCode::kInvalidArgument, "k=" + std::to_string(kk) + " exceeds the " + std::string(what) +
                                                         " subset size " + std::to_string(subset.size()));
        }
        return kmeans_fit(subset, kk, options);
    };
    if (!db.empty()) {
        set.full_ = fit(db, "full");
    } else if (warnings) {
        warnings->push_back("database is empty; full index skipped");
    }
    for (auto level : kAllIntensityLevels) {
        auto& slot = set.levels_[static_cast<int>(level)];
        slot.subset = std::make_shared<const EmbeddingDatabase>(filter_by_intensity(db, level));
        if (slot.subset->empty()) {
            if (warnings) warnings->push_back("no " + std::string(to_string(level)) + " records; index skipped");
            continue;
        }
        slot.index = fit(*slot.subset, to_string(level));
    }
    return set;
}

std::filesystem::path IndexSet::file_for(const std::filesystem::path& base, std::optional<IntensityLevel> level) {
    auto p = base;
    p += "." + std::string(level ? to_string(*level) : "full") + ".emix";
    return p;
}

void IndexSet::save(const std::filesystem::path& base) const {
    if (full_) save_index(*full_, file_for(base, std::nullopt));
    for (auto level : kAllIntensityLevels) {
        const auto& slot = levels_[static_cast<int>(level)];
        if (slot.index) save_index(*slot.index, file_for(base, level));
    }
}

IndexSet IndexSet::load(const std::filesystem::path& base, const EmbeddingDatabase& db) {
    IndexSet set;
    set.fingerprint_ = db.fingerprint();
    bool any = false;
    if (const auto p = file_for(base, std::nullopt); std::filesystem::exists(p)) {
        set.full_ = load_index(p, db);
        any = true;
    }
    for (auto level : kAllIntensityLevels) {
        auto& slot = set.levels_[static_cast<int>(level)];
        slot.subset = std::make_shared<const EmbeddingDatabase>(filter_by_intensity(db, level));
        if (const auto p = file_for(base, level); std::filesystem::exists(p)) {
            slot.index = load_index(p, *slot.subset);
            any = true;
        }
    }
    if (!any) throw Error(ErrorCode::kIo, "no EMIX files found for index base '" + base.string() + "'");
    return set;
}

const ClusterIndex* IndexSet::index(IntensityLevel level) const {
    const auto& slot = levels_[static_cast<int>(level)];
    return slot.index ? &*slot.index : nullptr;
}

const EmbeddingDatabase& IndexSet::subset(IntensityLevel level) const {
    return *levels_[static_cast<int>(level)].subset;
}

RetrievalResult retrieve(const EmbeddingDatabase& db, const IndexSet* indices, std::span<const float> query,
                         std::optional<IntensityLevel> intensity, RetrievalMethod method) {
    if (indices && indices->source_fingerprint() != db.fingerprint()) {
        throw Error(ErrorCode::kStaleIndex, "index set was built from a different database");
    }
    if (!intensity) {
        if (method == RetrievalMethod::kEmbedding) return retrieve_embedding_based(db, query);
        if (!indices || !indices->full()) {
            throw Error(ErrorCode::kInvalidArgument, "clustering retrieval requires a full-database index");
        }
        return retrieve_clustering_based(db, *indices->full(), query);
    }

    std::optional<EmbeddingDatabase> filtered;
    const EmbeddingDatabase* subset = nullptr;
    if (indices) {
        subset = &indices->subset(*intensity);
    } else {
        filtered.emplace(filter_by_intensity(db, *intensity));
        subset = &*filtered;
    }
    if (subset->empty()) {
        throw Error(ErrorCode::kEmptySubset,
                    "no records with intensity '" + std::string(to_string(*intensity)) + "'");
    }
    if (method == RetrievalMethod::kEmbedding) return retrieve_embedding_based(*subset, query);
    const ClusterIndex* index = indices ? indices->index(*intensity) : nullptr;
    if (!index) {
        throw Error(ErrorCode::kInvalidArgument,
                    "clustering retrieval requires an index for the '" + std::string(to_string(*intensity)) +
                        "' subset");
    }
    return retrieve_clustering_based(*subset, *index, query);
}

}  // namespace emorag
