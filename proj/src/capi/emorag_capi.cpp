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

#include "emorag/emorag.h"

#include <cstring>
#include <memory>
#include <optional>
#include <string>

#include "core/embedding_store.hpp"
#include "core/flow_matching.hpp"
#include "core/pipeline.hpp"
#include "core/retrieval.hpp"
#include "core/synthbench.hpp"

struct emorag_db {
    emorag::EmbeddingDatabase db;
};

struct emorag_index {
    emorag::IndexSet set;
};

struct emorag_fm_model {
    emorag::VectorFieldModel model;
};

struct emorag_bench {
    std::vector<emorag::BenchResult> rows;
};

namespace {

thread_local std::string g_last_error;
thread_local std::string g_last_stage;

emorag_status to_status(emorag::ErrorCode code) { return static_cast<emorag_status>(code); }

emorag_status fail(emorag_status status, std::string message, std::string stage = {}) {
    g_last_error = std::move(message);
    g_last_stage = std::move(stage);
    return status;
}

// Runs body, translating exceptions into status codes and the thread-local
// error message.
template <typename F>
emorag_status guarded(F&& body) noexcept {
    try {
        g_last_error.clear();
        g_last_stage.clear();
        body();
        return EMORAG_OK;
    } catch (const emorag::StageError& e) {
        return fail(to_status(e.code()), e.what(), e.stage());
    } catch (const emorag::Error& e) {
        return fail(to_status(e.code()), e.what());
    } catch (const std::bad_alloc&) {
        return fail(EMORAG_ERR_INTERNAL, "out of memory");
    } catch (const std::exception& e) {
        return fail(EMORAG_ERR_INTERNAL, e.what());
    } catch (...) {
        return fail(EMORAG_ERR_INTERNAL, "unknown error");
    }
}

void require(bool ok, const char* what) {
    if (!ok) throw emorag::Error(emorag::ErrorCode::kInvalidArgument, what);
}

std::optional<emorag::IntensityLevel> to_level(emorag_intensity level) {
    switch (level) {
        case EMORAG_INTENSITY_NONE: return std::nullopt;
        case EMORAG_INTENSITY_WEAK: return emorag::IntensityLevel::kWeak;
        case EMORAG_INTENSITY_NORMAL: return emorag::IntensityLevel::kNormal;
        case EMORAG_INTENSITY_STRONG: return emorag::IntensityLevel::kStrong;
    }
    throw emorag::Error(emorag::ErrorCode::kInvalidArgument, "invalid intensity value");
}

emorag::RetrievalMethod to_method(emorag_method method) {
    switch (method) {
        case EMORAG_METHOD_EMBEDDING: return emorag::RetrievalMethod::kEmbedding;
        case EMORAG_METHOD_CLUSTERING: return emorag::RetrievalMethod::kClustering;
    }
    throw emorag::Error(emorag::ErrorCode::kInvalidArgument, "invalid retrieval method value");
}

emorag::SyntheticDatasetConfig to_dataset(const emorag_synth_config& c) {
    emorag::SyntheticDatasetConfig d;
    d.num_emotions = c.num_emotions;
    d.dim = c.dim;
    d.records_per_emotion = c.records_per_emotion;
    d.cluster_sigma = c.cluster_sigma;
    d.center_spread = c.center_spread;
    d.intensity_mix = {c.intensity_mix[0], c.intensity_mix[1], c.intensity_mix[2]};
    d.seed = c.seed;
    return d;
}

const emorag::ClusterIndex* index_for(const emorag_index* index, emorag_intensity level) {
    if (!index) return nullptr;
    const auto l = to_level(level);
    return l ? index->set.index(*l) : index->set.full();
}

}  // namespace

extern "C" {

const char* emorag_version(void) { return "1.0.0"; }

const char* emorag_status_name(emorag_status status) {
    return emorag::to_string(static_cast<emorag::ErrorCode>(status)).data();
}

const char* emorag_last_error(void) { return g_last_error.c_str(); }
const char* emorag_last_error_stage(void) { return g_last_stage.c_str(); }
void emorag_string_free(char* s) { std::free(s); }

emorag_status emorag_parse_intensity(const char* text, emorag_intensity* out) {
    return guarded([&] {
        require(text && out, "null argument");
        *out = static_cast<emorag_intensity>(emorag::parse_intensity(text));
    });
}

emorag_status emorag_parse_method(const char* text, emorag_method* out) {
    return guarded([&] {
        require(text && out, "null argument");
        *out = static_cast<emorag_method>(emorag::parse_method(text));
    });
}

const char* emorag_intensity_name(emorag_intensity level) {
    if (level == EMORAG_INTENSITY_NONE) return "none";
    if (level < EMORAG_INTENSITY_NONE || level > EMORAG_INTENSITY_STRONG) return "unknown";
    return emorag::to_string(static_cast<emorag::IntensityLevel>(level)).data();
}

const char* emorag_method_name(emorag_method method) {
    return emorag::to_string(static_cast<emorag::RetrievalMethod>(method)).data();
}

emorag_status emorag_db_load(const char* path, emorag_db** out) {
    return guarded([&] {
        require(path && out, "null argument");
        *out = new emorag_db{emorag::load_db(path)};
    });
}

emorag_status emorag_db_save(const emorag_db* db, const char* path) {
    return guarded([&] {
        require(db && path, "null argument");
        emorag::save_db(db->db, path);
    });
}

emorag_status emorag_db_import_manifest(const char* path, emorag_db** out) {
    return guarded([&] {
        require(path && out, "null argument");
        *out = new emorag_db{emorag::import_manifest(path)};
    });
}

emorag_status emorag_db_export_manifest(const emorag_db* db, const char* path) {
    return guarded([&] {
        require(db && path, "null argument");
        emorag::export_manifest(db->db, path);
    });
}

void emorag_db_free(emorag_db* db) { delete db; }

size_t emorag_db_size(const emorag_db* db) { return db ? db->db.size() : 0; }
uint32_t emorag_db_dim(const emorag_db* db) { return db ? db->db.dim() : 0; }

size_t emorag_db_count_intensity(const emorag_db* db, emorag_intensity level) {
    if (!db) return 0;
    if (level == EMORAG_INTENSITY_NONE) return db->db.size();
    std::size_t n = 0;
    for (const auto& r : db->db.records()) n += static_cast<int>(r.intensity) == static_cast<int>(level);
    return n;
}

size_t emorag_db_label_count(const emorag_db* db) { return db ? db->db.labels().size() : 0; }

const char* emorag_db_record_id(const emorag_db* db, size_t pos) {
    return db && pos < db->db.size() ? db->db[pos].id.c_str() : nullptr;
}

const char* emorag_db_record_label(const emorag_db* db, size_t pos) {
    return db && pos < db->db.size() ? db->db[pos].emotion_label.c_str() : nullptr;
}

emorag_status emorag_db_record_embedding(const emorag_db* db, size_t pos, float* buf, size_t capacity) {
    return guarded([&] {
        require(db && buf, "null argument");
        require(pos < db->db.size(), "record position out of range");
        const auto& e = db->db[pos].embedding;
        if (capacity < e.size()) {
            throw emorag::Error(emorag::ErrorCode::kBufferTooSmall, "buffer too small");
        }
        std::copy(e.begin(), e.end(), buf);
    });
}

emorag_status emorag_db_filter_intensity(const emorag_db* db, emorag_intensity level, emorag_db** out) {
    return guarded([&] {
        require(db && out, "null argument");
        const auto l = to_level(level);
        *out = new emorag_db{l ? emorag::filter_by_intensity(db->db, *l) : db->db};
    });
}

void emorag_synth_config_init(emorag_synth_config* config) {
    if (!config) return;
    const emorag::SyntheticDatasetConfig d;
    config->num_emotions = d.num_emotions;
    config->dim = d.dim;
    config->records_per_emotion = d.records_per_emotion;
    config->cluster_sigma = d.cluster_sigma;
    config->center_spread = d.center_spread;
    for (int i = 0; i < 3; ++i) config->intensity_mix[i] = d.intensity_mix[i];
    config->seed = d.seed;
}

emorag_status emorag_db_generate(const emorag_synth_config* config, emorag_db** out) {
    return guarded([&] {
        require(config && out, "null argument");
        *out = new emorag_db{emorag::generate_synthetic_db(to_dataset(*config))};
    });
}

emorag_status emorag_db_write_token_fixtures(const emorag_db* db, const char* dir, uint32_t token_dim,
                                             uint64_t seed) {
    return guarded([&] {
        require(db && dir, "null argument");
        require(token_dim > 0, "token_dim must be positive");
        emorag::write_token_fixtures(db->db, dir, token_dim, seed);
    });
}

emorag_status emorag_embedding_load(const char* path, float* buf, size_t capacity, size_t* dim) {
    return guarded([&] {
        require(path && dim, "null argument");
        const auto e = emorag::load_embedding_json(path);
        *dim = e.size();
        if (!buf || capacity < e.size()) {
            throw emorag::Error(emorag::ErrorCode::kBufferTooSmall,
                                "embedding has " + std::to_string(e.size()) + " values");
        }
        std::copy(e.begin(), e.end(), buf);
    });
}

emorag_status emorag_embedding_save(const float* values, size_t dim, const char* path) {
    return guarded([&] {
        require(values && path && dim > 0, "null argument");
        emorag::save_embedding_json(std::span(values, dim), path);
    });
}

emorag_status emorag_cosine_similarity(const float* a, const float* b, size_t dim, double* out) {
    return guarded([&] {
        require(a && b && out, "null argument");
        *out = emorag::cosine_similarity(std::span(a, dim), std::span(b, dim));
    });
}

emorag_status emorag_index_build(const emorag_db* db, uint32_t k, uint32_t max_iters, uint64_t seed,
                                 emorag_index** out) {
    return guarded([&] {
        require(db && out, "null argument");
        *out = new emorag_index{emorag::IndexSet::build(db->db, k, emorag::KMeansOptions{max_iters, seed})};
    });
}

emorag_status emorag_index_save(const emorag_index* index, const char* base) {
    return guarded([&] {
        require(index && base, "null argument");
        index->set.save(base);
    });
}

emorag_status emorag_index_load(const char* base, const emorag_db* db, emorag_index** out) {
    return guarded([&] {
        require(base && db && out, "null argument");
        *out = new emorag_index{emorag::IndexSet::load(base, db->db)};
    });
}

void emorag_index_free(emorag_index* index) { delete index; }

uint32_t emorag_index_k(const emorag_index* index, emorag_intensity level) {
    try {
        const auto* i = index_for(index, level);
        return i ? i->k : 0;
    } catch (...) {
        return 0;
    }
}

double emorag_index_inertia(const emorag_index* index, emorag_intensity level) {
    try {
        const auto* i = index_for(index, level);
        return i ? i->inertia : -1.0;
    } catch (...) {
        return -1.0;
    }
}

emorag_status emorag_retrieve(const emorag_db* db, const emorag_index* index, const float* query, size_t dim,
                              emorag_intensity intensity, emorag_method method, emorag_retrieval_result* out) {
    return guarded([&] {
        require(db && query && out, "null argument");
        const auto r = emorag::retrieve(db->db, index ? &index->set : nullptr, std::span(query, dim),
                                        to_level(intensity), to_method(method));
        const auto pos = db->db.find(r.record_id);
        if (!pos) throw emorag::Error(emorag::ErrorCode::kInternal, "retrieved record not found in database");
        const auto& rec = db->db[*pos];
        out->record_id = rec.id.c_str();
        out->emotion_label = rec.emotion_label.c_str();
        out->record_index = *pos;
        out->intensity = static_cast<emorag_intensity>(rec.intensity);
        out->similarity = r.similarity;
        out->method = static_cast<emorag_method>(r.method);
        out->candidates_scanned = r.candidates_scanned;
        out->centroids_compared = r.centroids_compared;
        out->fell_back = r.fell_back ? 1 : 0;
        out->elapsed_ns = r.elapsed_ns;
    });
}

void emorag_bench_config_init(emorag_bench_config* config) {
    if (!config) return;
    static constexpr emorag_method kMethods[] = {EMORAG_METHOD_EMBEDDING, EMORAG_METHOD_CLUSTERING};
    static constexpr uint64_t kSizes[] = {3000, 8000};
    const emorag::BenchOptions defaults;
    config->methods = kMethods;
    config->method_count = 2;
    config->sizes = kSizes;
    config->size_count = 2;
    config->queries = defaults.queries;
    config->warmup = defaults.warmup;
    config->k = defaults.k;
    emorag_synth_config_init(&config->dataset);
    config->parallel = 0;
}

emorag_status emorag_bench_run(const emorag_bench_config* config, emorag_bench** out) {
    return guarded([&] {
        require(config && out, "null argument");
        require(config->methods && config->sizes, "methods and sizes are required");
        std::vector<emorag::BenchCell> cells;
        for (size_t m = 0; m < config->method_count; ++m) {
            for (size_t s = 0; s < config->size_count; ++s) {
                cells.push_back({to_method(config->methods[m]), static_cast<std::size_t>(config->sizes[s])});
            }
        }
        emorag::BenchOptions options;
        options.dataset = to_dataset(config->dataset);
        options.queries = config->queries;
        options.warmup = config->warmup;
        options.k = config->k;
        options.parallel = config->parallel != 0;
        *out = new emorag_bench{emorag::run_benchmark(cells, options)};
    });
}

size_t emorag_bench_row_count(const emorag_bench* bench) { return bench ? bench->rows.size() : 0; }

emorag_status emorag_bench_get_row(const emorag_bench* bench, size_t i, emorag_bench_row* out) {
    return guarded([&] {
        require(bench && out, "null argument");
        require(i < bench->rows.size(), "row index out of range");
        const auto& r = bench->rows[i];
        *out = emorag_bench_row{static_cast<emorag_method>(r.method),
                                r.db_size,
                                r.accuracy,
                                r.mean_latency_ns,
                                r.p95_latency_ns,
                                r.queries,
                                r.mean_candidates_scanned};
    });
}

emorag_status emorag_bench_emit(const emorag_bench* bench, const char* path, const char* format) {
    return guarded([&] {
        require(bench && path && format, "null argument");
        emorag::emit_report(bench->rows, path, emorag::parse_report_format(format));
    });
}

void emorag_bench_free(emorag_bench* bench) { delete bench; }

void emorag_fm_train_config_init(emorag_fm_train_config* config) {
    if (!config) return;
    const emorag::FlowTrainConfig d;
    config->task = "token-mel";
    config->learning_rate = d.learning_rate;
    config->batch_size = d.batch_size;
    config->steps = d.steps;
    config->ode_steps = d.ode_steps;
    config->seed = d.seed;
    config->hidden = nullptr;
    config->hidden_count = 0;
    config->token_dim = emorag::kDefaultTokenDim;
    config->mel_dim = emorag::kDefaultMelDim;
    config->speaker_dim = emorag::kDefaultSpeakerDim;
    config->use_sgd = 0;
}

emorag_status emorag_fm_train(const emorag_fm_train_config* config, emorag_fm_model** out, double* losses) {
    return guarded([&] {
        require(config && out, "null argument");
        const std::string task_name = config->task ? config->task : "token-mel";
        std::unique_ptr<emorag::FlowTask> task;
        std::vector<std::uint32_t> hidden;
        if (task_name == "toy2d") {
            task = std::make_unique<emorag::ToyGaussianTask>();
            hidden = {64, 64};
        } else if (task_name == "token-mel") {
            task = std::make_unique<emorag::SyntheticTokenMelTask>(config->token_dim, config->mel_dim,
                                                                   config->speaker_dim, 4, config->seed);
            hidden = {128, 128};
        } else {
            throw emorag::Error(emorag::ErrorCode::kInvalidArgument, "unknown training task '" + task_name + "'");
        }
        if (config->hidden && config->hidden_count) hidden.assign(config->hidden, config->hidden + config->hidden_count);

        emorag::FlowTrainConfig train;
        train.learning_rate = config->learning_rate;
        train.batch_size = config->batch_size;
        train.steps = config->steps;
        train.ode_steps = config->ode_steps;
        train.seed = config->seed;
        train.optimizer = config->use_sgd ? emorag::Optimizer::kSgd : emorag::Optimizer::kAdam;

        emorag::VectorFieldModel model(task->shape(hidden), config->seed);
        const auto history = emorag::train_flow_model(model, *task, train);
        if (losses) std::copy(history.begin(), history.end(), losses);
        *out = new emorag_fm_model{std::move(model)};
    });
}

emorag_status emorag_fm_load(const char* path, emorag_fm_model** out) {
    return guarded([&] {
        require(path && out, "null argument");
        *out = new emorag_fm_model{emorag::load_checkpoint(path)};
    });
}

emorag_status emorag_fm_save(const emorag_fm_model* model, const char* path) {
    return guarded([&] {
        require(model && path, "null argument");
        emorag::save_checkpoint(model->model, path);
    });
}

void emorag_fm_free(emorag_fm_model* model) { delete model; }

uint32_t emorag_fm_state_dim(const emorag_fm_model* model) { return model ? model->model.shape().state_dim : 0; }
uint32_t emorag_fm_cond_dim(const emorag_fm_model* model) { return model ? model->model.shape().cond_dim : 0; }
uint32_t emorag_fm_speaker_dim(const emorag_fm_model* model) { return model ? model->model.shape().speaker_dim : 0; }
size_t emorag_fm_parameter_count(const emorag_fm_model* model) { return model ? model->model.parameter_count() : 0; }

emorag_status emorag_fm_sample(const emorag_fm_model* model, size_t n, uint32_t ode_steps, uint64_t seed, double* out,
                               size_t capacity) {
    return guarded([&] {
        require(model && out, "null argument");
        const auto samples = emorag::sample_flow(model->model, n, ode_steps, seed);
        if (capacity < static_cast<size_t>(samples.size())) {
            throw emorag::Error(emorag::ErrorCode::kBufferTooSmall, "sample buffer too small");
        }
        for (Eigen::Index r = 0; r < samples.rows(); ++r) {
            for (Eigen::Index c = 0; c < samples.cols(); ++c) *out++ = samples(r, c);
        }
    });
}

void emorag_synth_request_init(emorag_synth_request* request) {
    if (!request) return;
    *request = emorag_synth_request{};
    request->intensity = EMORAG_INTENSITY_NONE;
    request->method = EMORAG_METHOD_CLUSTERING;
    request->ode_steps = emorag::kDefaultOdeSteps;
    request->frames_per_char = 4;
}

emorag_status emorag_synthesize(const emorag_synth_request* request, char** report_json) {
    return guarded([&] {
        require(request, "null argument");
        require(request->db_path && request->model_path && request->token_dir && request->reference_path &&
                    request->target_text && request->output_path,
                "db_path, model_path, token_dir, reference_path, target_text and output_path are required");

        // Asset loading is attributed to the stage that owns each asset.
        auto load = [](const char* stage, auto&& fn) {
            try {
                return fn();
            } catch (const emorag::Error& e) {
                throw emorag::StageError(stage, e.code(), e.what());
            }
        };
        const auto db = load("embedding_store", [&] { return emorag::load_db(request->db_path); });
        std::optional<emorag::IndexSet> indices;
        if (request->index_base) {
            indices = load("retrieval", [&] { return emorag::IndexSet::load(request->index_base, db); });
        }
        const auto model = load("flow_matching", [&] { return emorag::load_checkpoint(request->model_path); });
        const emorag::FileEmbeddingProvider provider;
        emorag::SynthesisRequest req;
        req.reference_embedding = load("embedding_provider", [&] { return provider.embed(request->reference_path); });
        req.target_text = request->target_text;
        req.intensity = to_level(request->intensity);
        req.method = to_method(request->method);
        req.seed = request->seed;
        req.ode_steps = request->ode_steps;

        const emorag::DirectoryTokenSource tokens(request->token_dir);
        const emorag::MockTokenGenerator generator(model.shape().cond_dim, request->frames_per_char);
        emorag::InferenceAssets assets{&db, indices ? &*indices : nullptr, &model, &tokens, &generator};
        const auto report = emorag::run_inference(req, assets, request->output_path);
        const auto text = report.to_json().dump(2) + "\n";
        if (request->report_path) {
            load("output", [&] {
                emorag::io::write_file_atomic(request->report_path, text);
                return 0;
            });
        }
        if (report_json) {
            *report_json = static_cast<char*>(std::malloc(text.size() + 1));
            if (!*report_json) throw std::bad_alloc();
            std::memcpy(*report_json, text.c_str(), text.size() + 1);
        }
    });
}

}  // extern "C"
