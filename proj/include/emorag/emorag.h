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

#ifndef EMORAG_EMORAG_H_
#define EMORAG_EMORAG_H_

/*
 * C interface to the emorag engine: emotion-embedding databases, cosine and
 * K-means cluster retrieval with intensity gating, the flow-matching mel
 * generator, the retrieval benchmark and end-to-end synthesis.
 *
 * All objects are opaque handles released with their *_free function.
 * Functions report failures through emorag_status; the message for the most
 * recent failure on the calling thread is available from emorag_last_error().
 */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(EMORAG_BUILDING_LIBRARY)
#    define EMORAG_API __declspec(dllexport)
#  else
#    define EMORAG_API __declspec(dllimport)
#  endif
#else
#  define EMORAG_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum emorag_status {
  EMORAG_OK = 0,
  EMORAG_ERR_INVALID_ARGUMENT = 1,
  EMORAG_ERR_IO = 2,
  EMORAG_ERR_MALFORMED = 3,
  EMORAG_ERR_DIMENSION_MISMATCH = 4,
  EMORAG_ERR_DUPLICATE_ID = 5,
  EMORAG_ERR_NON_FINITE = 6,
  EMORAG_ERR_ZERO_NORM = 7,
  EMORAG_ERR_NO_CANDIDATES = 8,
  EMORAG_ERR_EMPTY_SUBSET = 9,
  EMORAG_ERR_STALE_INDEX = 10,
  EMORAG_ERR_MISSING_ASSET = 11,
  EMORAG_ERR_DIVERGENCE = 12,
  EMORAG_ERR_BUFFER_TOO_SMALL = 13,
  EMORAG_ERR_INTERNAL = 99
} emorag_status;

typedef enum emorag_intensity {
  EMORAG_INTENSITY_NONE = -1, /* no gating; also selects the full index */
  EMORAG_INTENSITY_WEAK = 0,
  EMORAG_INTENSITY_NORMAL = 1,
  EMORAG_INTENSITY_STRONG = 2
} emorag_intensity;

typedef enum emorag_method {
  EMORAG_METHOD_EMBEDDING = 0,
  EMORAG_METHOD_CLUSTERING = 1
} emorag_method;

typedef struct emorag_db emorag_db;
typedef struct emorag_index emorag_index;
typedef struct emorag_fm_model emorag_fm_model;
typedef struct emorag_bench emorag_bench;

EMORAG_API const char *emorag_version(void);
EMORAG_API const char *emorag_status_name(emorag_status status);
/* Message of the last failure on this thread ("" if none). */
EMORAG_API const char *emorag_last_error(void);
/* Pipeline stage of the last failure on this thread ("" if not stage-attributed). */
EMORAG_API const char *emorag_last_error_stage(void);
/* Releases strings returned through char** out-parameters. */
EMORAG_API void emorag_string_free(char *s);

EMORAG_API emorag_status emorag_parse_intensity(const char *text, emorag_intensity *out);
EMORAG_API emorag_status emorag_parse_method(const char *text, emorag_method *out);
EMORAG_API const char *emorag_intensity_name(emorag_intensity level);
EMORAG_API const char *emorag_method_name(emorag_method method);

/* ---- embedding database ------------------------------------------------ */

EMORAG_API emorag_status emorag_db_load(const char *path, emorag_db **out);
EMORAG_API emorag_status emorag_db_save(const emorag_db *db, const char *path);
/* JSON manifest: {"dim": N, "records": [{"id", "emotion", "intensity",
 * "transcript", "audio_ref"?, "embedding": [...]}]} or a bare record array. */
EMORAG_API emorag_status emorag_db_import_manifest(const char *path, emorag_db **out);
EMORAG_API emorag_status emorag_db_export_manifest(const emorag_db *db, const char *path);
EMORAG_API void emorag_db_free(emorag_db *db);

EMORAG_API size_t emorag_db_size(const emorag_db *db);
EMORAG_API uint32_t emorag_db_dim(const emorag_db *db);
EMORAG_API size_t emorag_db_count_intensity(const emorag_db *db, emorag_intensity level);
EMORAG_API size_t emorag_db_label_count(const emorag_db *db);
/* Borrowed strings, valid while db lives. NULL when pos is out of range. */
EMORAG_API const char *emorag_db_record_id(const emorag_db *db, size_t pos);
EMORAG_API const char *emorag_db_record_label(const emorag_db *db, size_t pos);
EMORAG_API emorag_status emorag_db_record_embedding(const emorag_db *db, size_t pos, float *buf, size_t capacity);
EMORAG_API emorag_status emorag_db_filter_intensity(const emorag_db *db, emorag_intensity level, emorag_db **out);

typedef struct emorag_synth_config {
  uint32_t num_emotions;
  uint32_t dim;
  uint32_t records_per_emotion;
  double cluster_sigma;
  double center_spread;
  double intensity_mix[3]; /* weak, normal, strong; must sum to 1 */
  uint64_t seed;
} emorag_synth_config;

EMORAG_API void emorag_synth_config_init(emorag_synth_config *config);
EMORAG_API emorag_status emorag_db_generate(const emorag_synth_config *config, emorag_db **out);
/* Writes <dir>/<record id>.frames token fixtures for every record. */
EMORAG_API emorag_status emorag_db_write_token_fixtures(const emorag_db *db, const char *dir, uint32_t token_dim,
                                                        uint64_t seed);

/* A single embedding stored as a JSON array. *dim receives the stored length
 * even when EMORAG_ERR_BUFFER_TOO_SMALL is returned. */
EMORAG_API emorag_status emorag_embedding_load(const char *path, float *buf, size_t capacity, size_t *dim);
EMORAG_API emorag_status emorag_embedding_save(const float *values, size_t dim, const char *path);

/* ---- retrieval --------------------------------------------------------- */

EMORAG_API emorag_status emorag_cosine_similarity(const float *a, const float *b, size_t dim, double *out);

/* Builds the full-database index and one per non-empty intensity subset.
 * k == 0 uses the number of distinct emotion labels of each subset. */
EMORAG_API emorag_status emorag_index_build(const emorag_db *db, uint32_t k, uint32_t max_iters, uint64_t seed,
                                            emorag_index **out);
/* Writes <base>.full.emix and <base>.<level>.emix. */
EMORAG_API emorag_status emorag_index_save(const emorag_index *index, const char *base);
EMORAG_API emorag_status emorag_index_load(const char *base, const emorag_db *db, emorag_index **out);
EMORAG_API void emorag_index_free(emorag_index *index);
/* Cluster count of one index (NONE = full index); 0 when that index is absent. */
EMORAG_API uint32_t emorag_index_k(const emorag_index *index, emorag_intensity level);
EMORAG_API double emorag_index_inertia(const emorag_index *index, emorag_intensity level);

typedef struct emorag_retrieval_result {
  const char *record_id;     /* borrowed from the queried db */
  const char *emotion_label; /* borrowed from the queried db */
  size_t record_index;       /* position in the queried db */
  emorag_intensity intensity;
  double similarity;
  emorag_method method;
  uint64_t candidates_scanned;
  uint64_t centroids_compared;
  int fell_back;
  uint64_t elapsed_ns;
} emorag_retrieval_result;

/* index may be NULL for the embedding method. */
EMORAG_API emorag_status emorag_retrieve(const emorag_db *db, const emorag_index *index, const float *query,
                                         size_t dim, emorag_intensity intensity, emorag_method method,
                                         emorag_retrieval_result *out);

/* ---- benchmark --------------------------------------------------------- */

typedef struct emorag_bench_config {
  const emorag_method *methods;
  size_t method_count;
  const uint64_t *sizes;
  size_t size_count;
  size_t queries;
  size_t warmup;
  uint32_t k;
  emorag_synth_config dataset; /* records_per_emotion is derived per size */
  int parallel;
} emorag_bench_config;

typedef struct emorag_bench_row {
  emorag_method method;
  uint64_t db_size;
  double accuracy;
  uint64_t mean_latency_ns;
  uint64_t p95_latency_ns;
  uint64_t queries;
  double mean_candidates_scanned;
} emorag_bench_row;

EMORAG_API void emorag_bench_config_init(emorag_bench_config *config);
/* Cells run method-major: every size for methods[0], then methods[1], ... */
EMORAG_API emorag_status emorag_bench_run(const emorag_bench_config *config, emorag_bench **out);
EMORAG_API size_t emorag_bench_row_count(const emorag_bench *bench);
EMORAG_API emorag_status emorag_bench_get_row(const emorag_bench *bench, size_t i, emorag_bench_row *out);
/* format is "csv" or "json". */
EMORAG_API emorag_status emorag_bench_emit(const emorag_bench *bench, const char *path, const char *format);
EMORAG_API void emorag_bench_free(emorag_bench *bench);

/* ---- flow matching ----------------------------------------------------- */

typedef struct emorag_fm_train_config {
  const char *task; /* "token-mel" (default) or "toy2d" */
  double learning_rate;
  uint32_t batch_size;
  uint32_t steps;
  uint32_t ode_steps;
  uint64_t seed;
  const uint32_t *hidden; /* NULL selects the default widths */
  size_t hidden_count;
  uint32_t token_dim;
  uint32_t mel_dim;
  uint32_t speaker_dim;
  int use_sgd; /* 0: Adam, 1: plain gradient descent */
} emorag_fm_train_config;

EMORAG_API void emorag_fm_train_config_init(emorag_fm_train_config *config);
/* losses may be NULL; otherwise it must hold config->steps values. */
EMORAG_API emorag_status emorag_fm_train(const emorag_fm_train_config *config, emorag_fm_model **out,
                                         double *losses);
EMORAG_API emorag_status emorag_fm_load(const char *path, emorag_fm_model **out);
EMORAG_API emorag_status emorag_fm_save(const emorag_fm_model *model, const char *path);
EMORAG_API void emorag_fm_free(emorag_fm_model *model);
EMORAG_API uint32_t emorag_fm_state_dim(const emorag_fm_model *model);
EMORAG_API uint32_t emorag_fm_cond_dim(const emorag_fm_model *model);
EMORAG_API uint32_t emorag_fm_speaker_dim(const emorag_fm_model *model);
EMORAG_API size_t emorag_fm_parameter_count(const emorag_fm_model *model);
/* Unconditioned models only; out receives n x state_dim values row-major. */
EMORAG_API emorag_status emorag_fm_sample(const emorag_fm_model *model, size_t n, uint32_t ode_steps, uint64_t seed,
                                          double *out, size_t capacity);

/* ---- end-to-end synthesis ---------------------------------------------- */

typedef struct emorag_synth_request {
  const char *db_path;
  const char *index_base; /* required for the clustering method */
  const char *model_path;
  const char *token_dir;
  const char *reference_path; /* JSON embedding file */
  const char *target_text;
  emorag_intensity intensity;
  emorag_method method;
  uint64_t seed;
  uint32_t ode_steps;
  uint32_t frames_per_char;
  const char *output_path; /* mel artifact */
  const char *report_path; /* optional JSON run report */
} emorag_synth_request;

EMORAG_API void emorag_synth_request_init(emorag_synth_request *request);
/* report_json, when non-NULL, receives the run report (free with
 * emorag_string_free). Failures set emorag_last_error_stage(). */
EMORAG_API emorag_status emorag_synthesize(const emorag_synth_request *request, char **report_json);

#ifdef __cplusplus
}
#endif

#endif /* EMORAG_EMORAG_H_ */
