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

// emorag command-line front end. Every subcommand goes through the C API.
//
// Exit codes:
//   0  success
//   1  runtime failure (I/O, malformed input, invalid configuration)
//   2  usage error
//   3  empty intensity subset or no retrieval candidates
//   4  synthesis pipeline stage failure

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "emorag/emorag.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;
constexpr int kExitEmptySubset = 3;
constexpr int kExitStage = 4;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Thrown on a failed C API call; carries the exit code to use.
struct CommandFailure {
    int exit_code;
};

void configure_logging() {
    auto logger = spdlog::stderr_color_mt("emorag");
    logger->set_pattern("%^[%l]%$ %v");
    spdlog::set_default_logger(logger);
    spdlog::set_level(spdlog::level::warn);
    if (const char* level = std::getenv("EMORAG_LOG")) {
        spdlog::set_level(spdlog::level::from_str(level));
    }
}

int exit_code_for(emorag_status status) {
    if (status == EMORAG_ERR_EMPTY_SUBSET || status == EMORAG_ERR_NO_CANDIDATES) return kExitEmptySubset;
    return kExitFailure;
}

void check(emorag_status status, const char* what) {
    if (status == EMORAG_OK) return;
    spdlog::error("{}: {} ({})", what, emorag_last_error(), emorag_status_name(status));
    throw CommandFailure{exit_code_for(status)};
}

template <typename T>
std::vector<T> split_list(const std::string& text, T (*convert)(const std::string&)) {
    std::vector<T> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) throw UsageError("empty element in list '" + text + "'");
        out.push_back(convert(item));
    }
    if (out.empty()) throw UsageError("empty list");
    return out;
}

std::uint64_t to_u64(const std::string& s) {
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
        v = std::stoull(s, &used);
    } catch (const std::exception&) {
        throw UsageError("not an unsigned integer: '" + s + "'");
    }
    if (used != s.size()) throw UsageError("not an unsigned integer: '" + s + "'");
    return v;
}

std::uint32_t to_u32(const std::string& s) { return static_cast<std::uint32_t>(to_u64(s)); }

double to_double(const std::string& s) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used == s.size()) return v;
    } catch (const std::exception&) {
    }
    throw UsageError("not a number: '" + s + "'");
}

emorag_method to_method(const std::string& s) {
    emorag_method m;
    if (emorag_parse_method(s.c_str(), &m) != EMORAG_OK) throw UsageError(emorag_last_error());
    return m;
}

emorag_intensity parse_intensity_flag(const std::string& s) {
    if (s.empty()) return EMORAG_INTENSITY_NONE;
    emorag_intensity level;
    if (emorag_parse_intensity(s.c_str(), &level) != EMORAG_OK) throw UsageError(emorag_last_error());
    return level;
}

template <typename T, void (*Free)(T*)>
struct Handle {
    T* ptr = nullptr;
    Handle() = default;
    Handle(const Handle&) = delete;
    Handle& operator=(const Handle&) = delete;
    ~Handle() { Free(ptr); }
    T** out() { return &ptr; }
    T* get() const { return ptr; }
};

using Db = Handle<emorag_db, emorag_db_free>;
using Index = Handle<emorag_index, emorag_index_free>;
using Model = Handle<emorag_fm_model, emorag_fm_free>;
using Bench = Handle<emorag_bench, emorag_bench_free>;

void write_text_atomic(const std::string& path, const std::string& text) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out << text;
        if (!out.flush()) {
            spdlog::error("cannot write '{}'", path);
            throw CommandFailure{kExitFailure};
        }
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        spdlog::error("cannot rename into '{}'", path);
        throw CommandFailure{kExitFailure};
    }
}

// ---- gen-data -----------------------------------------------------------

struct GenDataArgs {
    emorag_synth_config config{};
    std::string mix = "0.333333333333333333,0.333333333333333333,0.333333333333333334";
    std::string out;
    std::string token_dir;
    std::uint32_t token_dim = 16;
    std::string manifest;
};

int cmd_gen_data(GenDataArgs& a) {
    const auto mix = split_list<double>(a.mix, to_double);
    if (mix.size() != 3) throw UsageError("--mix needs three fractions: weak,normal,strong");
    for (int i = 0; i < 3; ++i) a.config.intensity_mix[i] = mix[i];
    Db db;
    check(emorag_db_generate(&a.config, db.out()), "gen-data");
    check(emorag_db_save(db.get(), a.out.c_str()), "gen-data");
    if (!a.manifest.empty()) check(emorag_db_export_manifest(db.get(), a.manifest.c_str()), "gen-data");
    if (!a.token_dir.empty()) {
        check(emorag_db_write_token_fixtures(db.get(), a.token_dir.c_str(), a.token_dim, a.config.seed), "gen-data");
    }
    std::cout << emorag_db_size(db.get()) << " records written to " << a.out << "\n";
    return kExitOk;
}

// ---- import / export ----------------------------------------------------

int cmd_import(const std::string& manifest, const std::string& out) {
    Db db;
    check(emorag_db_import_manifest(manifest.c_str(), db.out()), "import");
    check(emorag_db_save(db.get(), out.c_str()), "import");
    std::cout << emorag_db_size(db.get()) << " records written to " << out << "\n";
    return kExitOk;
}

int cmd_export(const std::string& db_path, const std::string& out) {
    Db db;
    check(emorag_db_load(db_path.c_str(), db.out()), "export");
    check(emorag_db_export_manifest(db.get(), out.c_str()), "export");
    std::cout << emorag_db_size(db.get()) << " records exported to " << out << "\n";
    return kExitOk;
}

// ---- build-index --------------------------------------------------------

struct BuildIndexArgs {
    std::string db;
    std::string out;
    std::uint32_t k = 0;
    std::uint32_t max_iters = 100;
    std::uint64_t seed = 0;
};

int cmd_build_index(const BuildIndexArgs& a) {
    Db db;
    check(emorag_db_load(a.db.c_str(), db.out()), "build-index");
    Index index;
    check(emorag_index_build(db.get(), a.k, a.max_iters, a.seed, index.out()), "build-index");
    check(emorag_index_save(index.get(), a.out.c_str()), "build-index");
    for (auto level : {EMORAG_INTENSITY_NONE, EMORAG_INTENSITY_WEAK, EMORAG_INTENSITY_NORMAL, EMORAG_INTENSITY_STRONG}) {
        const auto k = emorag_index_k(index.get(), level);
        const char* name = level == EMORAG_INTENSITY_NONE ? "full" : emorag_intensity_name(level);
        if (k == 0) {
            spdlog::warn("no {} records; index skipped", name);
            continue;
        }
        std::cout << name << ": k=" << k << " inertia=" << emorag_index_inertia(index.get(), level) << "\n";
    }
    return kExitOk;
}

// ---- retrieve -----------------------------------------------------------

struct RetrieveArgs {
    std::string db;
    std::string index;
    std::string query;
    std::string method;
    std::string intensity;
};

int cmd_retrieve(const RetrieveArgs& a) {
    Db db;
    check(emorag_db_load(a.db.c_str(), db.out()), "retrieve");
    Index index;
    if (!a.index.empty()) check(emorag_index_load(a.index.c_str(), db.get(), index.out()), "retrieve");
    const auto method = a.method.empty() ? (a.index.empty() ? EMORAG_METHOD_EMBEDDING : EMORAG_METHOD_CLUSTERING)
                                         : to_method(a.method);
    const auto intensity = parse_intensity_flag(a.intensity);

    size_t dim = 0;
    std::vector<float> query(emorag_db_dim(db.get()));
    auto status = emorag_embedding_load(a.query.c_str(), query.data(), query.size(), &dim);
    if (status == EMORAG_ERR_BUFFER_TOO_SMALL) {
        query.resize(dim);
        status = emorag_embedding_load(a.query.c_str(), query.data(), query.size(), &dim);
    }
    check(status, "retrieve");
    query.resize(dim);

    emorag_retrieval_result r{};
    check(emorag_retrieve(db.get(), index.get(), query.data(), query.size(), intensity, method, &r), "retrieve");
    nlohmann::json doc = {
        {"record_id", r.record_id},
        {"emotion_label", r.emotion_label},
        {"intensity", emorag_intensity_name(r.intensity)},
        {"similarity", r.similarity},
        {"method", emorag_method_name(r.method)},
        {"candidates_scanned", r.candidates_scanned},
        {"centroids_compared", r.centroids_compared},
        {"fell_back", r.fell_back != 0},
        {"elapsed_ns", r.elapsed_ns},
    };
    std::cout << doc.dump(2) << "\n";
    return kExitOk;
}

// ---- bench --------------------------------------------------------------

struct BenchArgs {
    std::string sizes = "3000,8000";
    std::string methods = "embedding,clustering";
    std::size_t queries = 1000;
    std::size_t warmup = 10;
    std::uint32_t k = 0;
    emorag_synth_config dataset{};
    std::string out;
    std::string format = "csv";
    bool parallel = false;
};

int cmd_bench(BenchArgs& a) {
    const auto sizes = split_list<std::uint64_t>(a.sizes, to_u64);
    const auto methods = split_list<emorag_method>(a.methods, to_method);
    emorag_bench_config config;
    emorag_bench_config_init(&config);
    config.sizes = sizes.data();
    config.size_count = sizes.size();
    config.methods = methods.data();
    config.method_count = methods.size();
    config.queries = a.queries;
    config.warmup = a.warmup;
    config.k = a.k;
    config.dataset = a.dataset;
    config.parallel = a.parallel ? 1 : 0;

    Bench bench;
    check(emorag_bench_run(&config, bench.out()), "bench");
    std::cout << "method,db_size,accuracy,mean_latency_ns,p95_latency_ns,queries,mean_candidates_scanned\n";
    for (size_t i = 0; i < emorag_bench_row_count(bench.get()); ++i) {
        emorag_bench_row row;
        check(emorag_bench_get_row(bench.get(), i, &row), "bench");
        std::cout << emorag_method_name(row.method) << ',' << row.db_size << ',' << row.accuracy << ','
                  << row.mean_latency_ns << ',' << row.p95_latency_ns << ',' << row.queries << ','
                  << row.mean_candidates_scanned << "\n";
    }
    if (!a.out.empty()) check(emorag_bench_emit(bench.get(), a.out.c_str(), a.format.c_str()), "bench");
    return kExitOk;
}

// ---- train-fm / sample-fm -----------------------------------------------

struct TrainArgs {
    emorag_fm_train_config config{};
    std::string task = "token-mel";
    std::string hidden;
    std::string out;
    std::string loss_log;
    bool sgd = false;
};

int cmd_train_fm(TrainArgs& a) {
    std::vector<std::uint32_t> hidden;
    if (!a.hidden.empty()) hidden = split_list<std::uint32_t>(a.hidden, to_u32);
    a.config.task = a.task.c_str();
    a.config.hidden = hidden.empty() ? nullptr : hidden.data();
    a.config.hidden_count = hidden.size();
    a.config.use_sgd = a.sgd ? 1 : 0;

    std::vector<double> losses(a.config.steps);
    Model model;
    check(emorag_fm_train(&a.config, model.out(), losses.data()), "train-fm");
    check(emorag_fm_save(model.get(), a.out.c_str()), "train-fm");
    if (!a.loss_log.empty()) {
        std::ostringstream log;
        log.precision(17);
        log << "step,loss\n";
        for (std::size_t i = 0; i < losses.size(); ++i) log << i << ',' << losses[i] << '\n';
        write_text_atomic(a.loss_log, log.str());
    }
    std::cout << "parameters=" << emorag_fm_parameter_count(model.get()) << " steps=" << a.config.steps;
    if (!losses.empty()) std::cout << " first_loss=" << losses.front() << " final_loss=" << losses.back();
    std::cout << "\n";
    return kExitOk;
}

struct SampleArgs {
    std::string model;
    std::size_t n = 1000;
    std::uint32_t ode_steps = 32;
    std::uint64_t seed = 0;
    std::string out;
};

int cmd_sample_fm(const SampleArgs& a) {
    Model model;
    check(emorag_fm_load(a.model.c_str(), model.out()), "sample-fm");
    const auto dim = emorag_fm_state_dim(model.get());
    std::vector<double> samples(a.n * dim);
    check(emorag_fm_sample(model.get(), a.n, a.ode_steps, a.seed, samples.data(), samples.size()), "sample-fm");
    std::ostringstream csv;
    csv.precision(17);
    for (std::uint32_t d = 0; d < dim; ++d) csv << (d ? "," : "") << 'x' << d;
    csv << '\n';
    for (std::size_t i = 0; i < a.n; ++i) {
        for (std::uint32_t d = 0; d < dim; ++d) csv << (d ? "," : "") << samples[i * dim + d];
        csv << '\n';
    }
    if (a.out.empty()) {
        std::cout << csv.str();
    } else {
        write_text_atomic(a.out, csv.str());
    }
    return kExitOk;
}

// ---- synth --------------------------------------------------------------

struct SynthArgs {
    std::string db, index, model, tokens, reference, text, intensity, method = "clustering", out, report;
    std::uint64_t seed = 0;
    std::uint32_t ode_steps = 32;
    std::uint32_t frames_per_char = 4;
};

int cmd_synth(const SynthArgs& a) {
    emorag_synth_request req;
    emorag_synth_request_init(&req);
    req.db_path = a.db.c_str();
    req.index_base = a.index.empty() ? nullptr : a.index.c_str();
    req.model_path = a.model.c_str();
    req.token_dir = a.tokens.c_str();
    req.reference_path = a.reference.c_str();
    req.target_text = a.text.c_str();
    req.intensity = parse_intensity_flag(a.intensity);
    req.method = to_method(a.method);
    req.seed = a.seed;
    req.ode_steps = a.ode_steps;
    req.frames_per_char = a.frames_per_char;
    req.output_path = a.out.c_str();
    req.report_path = a.report.empty() ? nullptr : a.report.c_str();

    char* report = nullptr;
    const auto status = emorag_synthesize(&req, &report);
    if (status != EMORAG_OK) {
        const std::string stage = emorag_last_error_stage();
        spdlog::error("synth failed in stage '{}': {} ({})", stage.empty() ? "request" : stage, emorag_last_error(),
                      emorag_status_name(status));
        if (status == EMORAG_ERR_EMPTY_SUBSET || status == EMORAG_ERR_NO_CANDIDATES) return kExitEmptySubset;
        return stage.empty() ? kExitFailure : kExitStage;
    }
    std::cout << report;
    emorag_string_free(report);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    configure_logging();

    CLI::App app{"emorag: retrieval-augmented emotion prompt selection and flow-matching mel synthesis"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(emorag_version()));

    GenDataArgs gen;
    emorag_synth_config_init(&gen.config);
    gen.config.num_emotions = 4;
    gen.config.records_per_emotion = 750;
    auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic emotion-embedding database");
    gen_cmd->add_option("--emotions", gen.config.num_emotions, "Number of emotion clusters")->capture_default_str();
    gen_cmd->add_option("--per-emotion", gen.config.records_per_emotion, "Records per emotion")->capture_default_str();
    gen_cmd->add_option("--dim", gen.config.dim, "Embedding dimension")->capture_default_str();
    gen_cmd->add_option("--sigma", gen.config.cluster_sigma, "Per-dimension cluster noise")->capture_default_str();
    gen_cmd->add_option("--spread", gen.config.center_spread, "Cluster centers drawn in [-spread, spread]^dim")
        ->capture_default_str();
    gen_cmd->add_option("--mix", gen.mix, "Intensity fractions weak,normal,strong");
    gen_cmd->add_option("--seed", gen.config.seed, "Random seed")->capture_default_str();
    gen_cmd->add_option("--out", gen.out, "Output EMDB file")->required();
    gen_cmd->add_option("--manifest", gen.manifest, "Also export a JSON manifest");
    gen_cmd->add_option("--token-dir", gen.token_dir, "Write per-record token fixture files here");
    gen_cmd->add_option("--token-dim", gen.token_dim, "Token feature width for fixtures")->capture_default_str();

    std::string import_manifest, import_out;
    auto* import_cmd = app.add_subcommand("import", "Convert a JSON manifest to an EMDB database");
    import_cmd->add_option("--manifest", import_manifest, "JSON manifest")->required();
    import_cmd->add_option("--out", import_out, "Output EMDB file")->required();

    std::string export_db, export_out;
    auto* export_cmd = app.add_subcommand("export", "Export a database as a JSON manifest (for plotting)");
    export_cmd->add_option("--db", export_db, "EMDB database")->required();
    export_cmd->add_option("--out", export_out, "Output JSON file")->required();

    BuildIndexArgs bi;
    auto* bi_cmd = app.add_subcommand("build-index", "Build K-means indices for the full set and each intensity");
    bi_cmd->add_option("--db", bi.db, "EMDB database")->required();
    bi_cmd->add_option("--out", bi.out, "Index base path (writes <base>.<level>.emix)")->required();
    bi_cmd->add_option("--k", bi.k, "Cluster count (default: distinct emotion labels per subset)");
    bi_cmd->add_option("--max-iters", bi.max_iters, "Lloyd iteration cap")->capture_default_str()
        ->check(CLI::PositiveNumber);
    bi_cmd->add_option("--seed", bi.seed, "Random seed")->capture_default_str();

    RetrieveArgs rt;
    auto* rt_cmd = app.add_subcommand("retrieve", "Retrieve the best-matching record for a query embedding");
    rt_cmd->add_option("--db", rt.db, "EMDB database")->required();
    rt_cmd->add_option("--index", rt.index, "Index base path (required for clustering)");
    rt_cmd->add_option("--query", rt.query, "Query embedding JSON file")->required();
    rt_cmd->add_option("--method", rt.method, "embedding or clustering");
    rt_cmd->add_option("--intensity", rt.intensity, "weak, normal or strong");

    BenchArgs bench;
    emorag_synth_config_init(&bench.dataset);
    auto* bench_cmd = app.add_subcommand("bench", "Accuracy/latency benchmark over methods and database sizes");
    bench_cmd->add_option("--sizes", bench.sizes, "Comma-separated database sizes")->capture_default_str();
    bench_cmd->add_option("--methods", bench.methods, "Comma-separated methods")->capture_default_str();
    bench_cmd->add_option("--queries", bench.queries, "Queries per cell")->capture_default_str()
        ->check(CLI::PositiveNumber);
    bench_cmd->add_option("--warmup", bench.warmup, "Discarded warm-up queries")->capture_default_str();
    bench_cmd->add_option("--k", bench.k, "Cluster count (default: emotion count)");
    bench_cmd->add_option("--emotions", bench.dataset.num_emotions, "Emotion clusters")->capture_default_str();
    bench_cmd->add_option("--dim", bench.dataset.dim, "Embedding dimension")->capture_default_str();
    bench_cmd->add_option("--sigma", bench.dataset.cluster_sigma, "Cluster noise")->capture_default_str();
    bench_cmd->add_option("--spread", bench.dataset.center_spread, "Center spread")->capture_default_str();
    bench_cmd->add_option("--seed", bench.dataset.seed, "Random seed")->capture_default_str();
    bench_cmd->add_option("--out", bench.out, "Report file");
    bench_cmd->add_option("--format", bench.format, "csv or json")->capture_default_str()
        ->check(CLI::IsMember({"csv", "json"}));
    bench_cmd->add_flag("--parallel", bench.parallel, "Run cells concurrently (timings become best-effort)");

    TrainArgs train;
    emorag_fm_train_config_init(&train.config);
    auto* train_cmd = app.add_subcommand("train-fm", "Train the flow-matching vector field on a synthetic task");
    train_cmd->add_option("--task", train.task, "token-mel or toy2d")->capture_default_str()
        ->check(CLI::IsMember({"token-mel", "toy2d"}));
    train_cmd->add_option("--steps", train.config.steps, "Training steps")->capture_default_str();
    train_cmd->add_option("--batch", train.config.batch_size, "Batch size")->capture_default_str()
        ->check(CLI::PositiveNumber);
    train_cmd->add_option("--lr", train.config.learning_rate, "Learning rate")->capture_default_str()
        ->check(CLI::PositiveNumber);
    train_cmd->add_option("--seed", train.config.seed, "Random seed")->capture_default_str();
    train_cmd->add_option("--hidden", train.hidden, "Comma-separated hidden widths");
    train_cmd->add_option("--token-dim", train.config.token_dim, "Token feature width")->capture_default_str();
    train_cmd->add_option("--mel-dim", train.config.mel_dim, "Mel bins")->capture_default_str();
    train_cmd->add_option("--speaker-dim", train.config.speaker_dim, "Speaker embedding width")->capture_default_str();
    train_cmd->add_option("--ode-steps", train.config.ode_steps, "Euler steps used at sampling time")
        ->capture_default_str()->check(CLI::PositiveNumber);
    train_cmd->add_flag("--sgd", train.sgd, "Plain gradient descent instead of Adam");
    train_cmd->add_option("--out", train.out, "Checkpoint path")->required();
    train_cmd->add_option("--loss-log", train.loss_log, "Per-step loss CSV");

    SampleArgs sample;
    auto* sample_cmd = app.add_subcommand("sample-fm", "Draw samples from an unconditioned flow model");
    sample_cmd->add_option("--model", sample.model, "Checkpoint path")->required();
    sample_cmd->add_option("--n", sample.n, "Number of samples")->capture_default_str();
    sample_cmd->add_option("--ode-steps", sample.ode_steps, "Euler steps")->capture_default_str()
        ->check(CLI::PositiveNumber);
    sample_cmd->add_option("--seed", sample.seed, "Random seed")->capture_default_str();
    sample_cmd->add_option("--out", sample.out, "CSV output (default stdout)");

    SynthArgs synth;
    auto* synth_cmd = app.add_subcommand("synth", "Run retrieval, prompt assembly, token generation and mel synthesis");
    synth_cmd->add_option("--db", synth.db, "EMDB database")->required();
    synth_cmd->add_option("--index", synth.index, "Index base path (required for clustering)");
    synth_cmd->add_option("--model", synth.model, "Flow-matching checkpoint")->required();
    synth_cmd->add_option("--tokens", synth.tokens, "Directory of per-record token files")->required();
    synth_cmd->add_option("--reference", synth.reference, "Reference emotion embedding JSON")->required();
    synth_cmd->add_option("--text", synth.text, "Target text")->required();
    synth_cmd->add_option("--intensity", synth.intensity, "weak, normal or strong");
    synth_cmd->add_option("--method", synth.method, "embedding or clustering")->capture_default_str();
    synth_cmd->add_option("--seed", synth.seed, "Random seed")->capture_default_str();
    synth_cmd->add_option("--ode-steps", synth.ode_steps, "Euler steps")->capture_default_str()
        ->check(CLI::PositiveNumber);
    synth_cmd->add_option("--frames-per-char", synth.frames_per_char, "Mock generator length rule")
        ->capture_default_str()->check(CLI::PositiveNumber);
    synth_cmd->add_option("--out", synth.out, "Mel artifact path")->required();
    synth_cmd->add_option("--report", synth.report, "Run report JSON path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (*gen_cmd) return cmd_gen_data(gen);
        if (*import_cmd) return cmd_import(import_manifest, import_out);
        if (*export_cmd) return cmd_export(export_db, export_out);
        if (*bi_cmd) return cmd_build_index(bi);
        if (*rt_cmd) return cmd_retrieve(rt);
        if (*bench_cmd) return cmd_bench(bench);
        if (*train_cmd) return cmd_train_fm(train);
        if (*sample_cmd) return cmd_sample_fm(sample);
        if (*synth_cmd) return cmd_synth(synth);
    } catch (const UsageError& e) {
        spdlog::error("{}", e.what());
        return kExitUsage;
    } catch (const CommandFailure& f) {
        return f.exit_code;
    }
    return kExitUsage;
}
