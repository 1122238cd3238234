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

#include "core/synthbench.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <map>
#include <random>
#include <sstream>

#include <json.hpp>

namespace emorag {
namespace {

EmotionEmbedding draw_member(const std::vector<double>& center, double sigma, std::mt19937_64& rng) {
    std::normal_distribution<double> noise(0.0, 1.0);
    std::vector<double> v(center.size());
    double sq = 0.0;
    for (std::size_t d = 0; d < center.size(); ++d) {
        v[d] = center[d] + (sigma > 0.0 ? sigma * noise(rng) : 0.0);
        sq += v[d] * v[d];
    }
    if (sq == 0.0) throw Error(ErrorCode::kZeroNorm, "synthetic sample has zero norm");
    const double inv = 1.0 / std::sqrt(sq);
    EmotionEmbedding e(center.size());
    for (std::size_t d = 0; d < center.size(); ++d) e[d] = static_cast<float>(v[d] * inv);
    return e;
}

std::uint64_t percentile_nearest_rank(std::vector<std::uint64_t> values, double p) {
    std::sort(values.begin(), values.end());
    const auto rank = static_cast<std::size_t>(std::ceil(p * static_cast<double>(values.size())));
    return values[std::clamp<std::size_t>(rank, 1, values.size()) - 1];
}

BenchResult run_cell(const BenchCell& cell, const BenchOptions& options) {
    auto config = options.dataset;
    if (cell.db_size == 0 || cell.db_size % config.num_emotions != 0) {
        throw Error(ErrorCode::kInvalidArgument, "database size " + std::to_string(cell.db_size) +
                                                     " is not available: it must be a positive multiple of " +
                                                     std::to_string(config.num_emotions) + " emotions");
    }
    config.records_per_emotion = static_cast<std::uint32_t>(cell.db_size / config.num_emotions);
    const auto db = generate_synthetic_db(config);

    std::optional<IndexSet> indices;
    if (cell.method == RetrievalMethod::kClustering) {
        indices = IndexSet::build(db, options.k, KMeansOptions{options.kmeans_max_iters, config.seed});
    }
    const auto queries = generate_queries(config, options.queries, config.seed ^ 0x5151'7e57ULL);
    const IndexSet* idx = indices ? &*indices : nullptr;

    const auto warm = std::min(options.warmup, queries.size());
    for (std::size_t i = 0; i < warm; ++i) {
        (void)retrieve(db, idx, queries[i].embedding, std::nullopt, cell.method);
    }

    std::vector<QueryLog> logs;
    BenchResult r;
    r.method = cell.method;
    r.db_size = db.size();
    r.queries = queries.size();
    r.accuracy = measure_accuracy(db, idx, cell.method, queries, &logs);

    std::vector<std::uint64_t> latencies;
    latencies.reserve(logs.size());
    long double total = 0;
    std::size_t scanned = 0;
    for (const auto& log : logs) {
        latencies.push_back(log.elapsed_ns);
        total += log.elapsed_ns;
        scanned += log.candidates_scanned;
    }
    r.mean_latency_ns = static_cast<std::uint64_t>(std::llround(total / static_cast<long double>(logs.size())));
    r.p95_latency_ns = percentile_nearest_rank(std::move(latencies), 0.95);
    r.mean_candidates_scanned = static_cast<double>(scanned) / static_cast<double>(logs.size());
    return r;
}

}  // namespace

void SyntheticDatasetConfig::validate() const {
    if (num_emotions == 0 || dim == 0 || records_per_emotion == 0) {
        throw Error(ErrorCode::kInvalidArgument, "num_emotions, dim and records_per_emotion must be positive");
    }
    if (!(cluster_sigma >= 0.0) || !(center_spread > 0.0)) {
        throw Error(ErrorCode::kInvalidArgument, "cluster_sigma must be >= 0 and center_spread > 0");
    }
    double sum = 0.0;
    for (double f : intensity_mix) {
        if (!(f >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "intensity fractions must be non-negative");
        sum += f;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw Error(ErrorCode::kInvalidArgument, "intensity fractions must sum to 1");
}

std::string emotion_name(std::uint32_t cluster) { return "emotion_" + std::to_string(cluster); }

std::vector<std::vector<double>> mixture_centers(const SyntheticDatasetConfig& config) {
    std::mt19937_64 rng(config.seed);
    std::uniform_real_distribution<double> unit(-config.center_spread, config.center_spread);
    std::vector<std::vector<double>> centers(config.num_emotions, std::vector<double>(config.dim));
    for (auto& c : centers) {
        for (auto& x : c) x = unit(rng);
    }
    return centers;
}

double center_separation_in_sigmas(const SyntheticDatasetConfig& config) {
    const auto centers = mixture_centers(config);
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < centers.size(); ++i) {
        for (std::size_t j = i + 1; j < centers.size(); ++j) {
            double sq = 0.0;
            for (std::size_t d = 0; d < config.dim; ++d) sq += std::pow(centers[i][d] - centers[j][d], 2);
            best = std::min(best, std::sqrt(sq));
        }
    }
    return best / config.cluster_sigma;
}

EmbeddingDatabase generate_synthetic_db(const SyntheticDatasetConfig& config) {
    config.validate();
    const auto centers = mixture_centers(config);
    // Records use a stream separate from the centers so that databases of
    // different sizes share the same mixture.
    std::mt19937_64 rng(config.seed ^ 0xdb5eed00ULL);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    std::vector<UtteranceRecord> records;
    records.reserve(std::size_t{config.num_emotions} * config.records_per_emotion);
    std::size_t serial = 0;
    for (std::uint32_t e = 0; e < config.num_emotions; ++e) {
        for (std::uint32_t j = 0; j < config.records_per_emotion; ++j, ++serial) {
            UtteranceRecord rec;
            char id[32];
            std::snprintf(id, sizeof id, "utt%06zu", serial);
            rec.id = id;
            rec.emotion_label = emotion_name(e);
            rec.embedding = draw_member(centers[e], config.cluster_sigma, rng);
            const double u = unit(rng);
            rec.intensity = u < config.intensity_mix[0]                               ? IntensityLevel::kWeak
                            : u < config.intensity_mix[0] + config.intensity_mix[1] ? IntensityLevel::kNormal
                                                                                      : IntensityLevel::kStrong;
            rec.transcript = "synthetic utterance " + std::to_string(serial);
            records.push_back(std::move(rec));
        }
    }
    return EmbeddingDatabase(config.dim, std::move(records));
}

std::vector<LabeledQuery> generate_queries(const SyntheticDatasetConfig& config, std::size_t count,
                                           std::uint64_t seed) {
    config.validate();
    const auto centers = mixture_centers(config);
    std::mt19937_64 rng(seed);
    std::vector<LabeledQuery> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const auto e = static_cast<std::uint32_t>(i % config.num_emotions);
        out.push_back({draw_member(centers[e], config.cluster_sigma, rng), emotion_name(e)});
    }
    return out;
}

double measure_accuracy(const EmbeddingDatabase& db, const IndexSet* indices, RetrievalMethod method,
                        const std::vector<LabeledQuery>& queries, std::vector<QueryLog>* logs) {
    if (queries.empty()) throw Error(ErrorCode::kInvalidArgument, "measure_accuracy: query set is empty");
    std::size_t matched = 0;
    if (logs) logs->reserve(logs->size() + queries.size());
    for (const auto& q : queries) {
        const auto r = retrieve(db, indices, q.embedding, std::nullopt, method);
        const bool hit = r.emotion_label == q.label;
        matched += hit;
        if (logs) logs->push_back({r.candidates_scanned, r.elapsed_ns, hit});
    }
    return static_cast<double>(matched) / static_cast<double>(queries.size());
}

std::vector<BenchResult> run_benchmark(const std::vector<BenchCell>& cells, const BenchOptions& options) {
    if (options.queries == 0) throw Error(ErrorCode::kInvalidArgument, "query count must be positive");
    if (cells.empty()) throw Error(ErrorCode::kInvalidArgument, "no benchmark cells requested");
    options.dataset.validate();
    std::vector<BenchResult> results;
    if (!options.parallel) {
        for (const auto& cell : cells) results.push_back(run_cell(cell, options));
        return results;
    }
    std::vector<std::future<BenchResult>> pending;
    for (const auto& cell : cells) {
        pending.push_back(std::async(std::launch::async, [&options, cell] { return run_cell(cell, options); }));
    }
    for (auto& f : pending) results.push_back(f.get());
    return results;
}

ReportFormat parse_report_format(std::string_view text) {
    if (text == "csv") return ReportFormat::kCsv;
    if (text == "json") return ReportFormat::kJson;
    throw Error(ErrorCode::kInvalidArgument, "unknown report format '" + std::string(text) + "'");
}

void emit_report(const std::vector<BenchResult>& results, const std::filesystem::path& path, ReportFormat format) {
    if (results.empty()) throw Error(ErrorCode::kInvalidArgument, "emit_report: no results");
    if (format == ReportFormat::kCsv) {
        std::ostringstream out;
        out.precision(17);
        out << "method,db_size,accuracy,mean_latency_ns,p95_latency_ns,queries\n";
        for (const auto& r : results) {
            out << to_string(r.method) << ',' << r.db_size << ',' << r.accuracy << ',' << r.mean_latency_ns << ','
                << r.p95_latency_ns << ',' << r.queries << '\n';
        }
        io::write_file_atomic(path, out.str());
        return;
    }
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : results) {
        rows.push_back({
            {"method", std::string(to_string(r.method))},
            {"db_size", r.db_size},
            {"accuracy", r.accuracy},
            {"mean_latency_ns", r.mean_latency_ns},
            {"p95_latency_ns", r.p95_latency_ns},
            {"queries", r.queries},
            {"mean_candidates_scanned", r.mean_candidates_scanned},
        });
    }
    io::write_file_atomic(path, rows.dump(2) + "\n");
}

std::vector<BenchResult> read_report_json(const std::filesystem::path& path) {
    const auto bytes = io::read_file(path);
    try {
        const auto doc = nlohmann::json::parse(bytes.begin(), bytes.end());
        std::vector<BenchResult> out;
        for (const auto& row : doc) {
            BenchResult r;
            r.method = parse_method(row.at("method").get<std::string>());
            r.db_size = row.at("db_size").get<std::size_t>();
            r.accuracy = row.at("accuracy").get<double>();
            r.mean_latency_ns = row.at("mean_latency_ns").get<std::uint64_t>();
            r.p95_latency_ns = row.at("p95_latency_ns").get<std::uint64_t>();
            r.queries = row.at("queries").get<std::size_t>();
            r.mean_candidates_scanned = row.value("mean_candidates_scanned", 0.0);
            out.push_back(r);
        }
        return out;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::kMalformedHeader, "report '" + path.string() + "': " + e.what());
    }
}

}  // namespace emorag
