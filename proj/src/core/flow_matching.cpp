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

#include "core/flow_matching.hpp"

#include <cmath>
#include <sstream>

#include <json.hpp>

namespace emorag {
namespace {

constexpr std::string_view kCheckpointFormat = "emorag-vf";
constexpr std::string_view kFramesFormat = "emorag-frames";

bool all_finite(const Eigen::MatrixXd& m) { return m.allFinite(); }

Eigen::MatrixXd standard_normal(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = normal(rng);
    }
    return m;
}

// Broadcasts a single-row block to `rows` rows.
Eigen::MatrixXd broadcast(const Eigen::MatrixXd& m, Eigen::Index rows, const char* what) {
    if (m.rows() == rows) return m;
    if (m.rows() == 1 || m.cols() == 0) return m.row(0).replicate(rows, 1);
    throw Error(ErrorCode::kDimensionMismatch, std::string(what) + " rows do not match the state rows");
}

Eigen::MatrixXd assemble_inputs(const ModelShape& shape, const Eigen::MatrixXd& xt, const Eigen::VectorXd& t,
                                const Eigen::MatrixXd& cond, const Eigen::MatrixXd& spk) {
    const auto rows = xt.rows();
    if (xt.cols() != shape.state_dim || cond.cols() != shape.cond_dim || spk.cols() != shape.speaker_dim ||
        t.size() != rows) {
        throw Error(ErrorCode::kDimensionMismatch,
                    "vector field input shapes (state " + std::to_string(xt.cols()) + ", cond " +
                        std::to_string(cond.cols()) + ", speaker " + std::to_string(spk.cols()) +
                        ") do not match the model");
    }
    Eigen::MatrixXd in(rows, shape.input_dim());
    in.leftCols(shape.state_dim) = xt;
    in.col(shape.state_dim) = t;
    if (shape.cond_dim) in.middleCols(shape.state_dim + 1, shape.cond_dim) = broadcast(cond, rows, "cond");
    if (shape.speaker_dim) in.rightCols(shape.speaker_dim) = broadcast(spk, rows, "speaker");
    return in;
}

struct ForwardTrace {
    std::vector<Eigen::MatrixXd> activations;  // activations[0] = inputs, last = output
};

Eigen::MatrixXd run_layers(const std::vector<Eigen::MatrixXd>& weights, const std::vector<Eigen::VectorXd>& biases,
                           const Eigen::MatrixXd& inputs, ForwardTrace* trace) {
    Eigen::MatrixXd a = inputs;
    if (trace) trace->activations.push_back(a);
    for (std::size_t l = 0; l < weights.size(); ++l) {
        Eigen::MatrixXd z = a * weights[l].transpose();
        z.rowwise() += biases[l].transpose();
        if (l + 1 < weights.size()) z = z.array().tanh();
        a = std::move(z);
        if (trace) trace->activations.push_back(a);
    }
    return a;
}

Eigen::MatrixXd batch_inputs(const ModelShape& shape, const FlowBatch& batch, Eigen::MatrixXd& target) {
    if (batch.size() == 0) throw Error(ErrorCode::kInvalidArgument, "vf_loss: batch is empty");
    if (batch.x1.rows() != batch.size() || batch.x1.cols() != batch.x0.cols()) {
        throw Error(ErrorCode::kDimensionMismatch, "vf_loss: x0 and x1 shapes differ");
    }
    const Eigen::MatrixXd xt = (1.0 - batch.t.array()).matrix().asDiagonal() * batch.x0 +
                               batch.t.asDiagonal() * batch.x1;
    target = batch.x1 - batch.x0;
    Eigen::MatrixXd cond = batch.cond.cols() ? batch.cond : Eigen::MatrixXd(batch.size(), 0);
    Eigen::MatrixXd spk = batch.spk.cols() ? batch.spk : Eigen::MatrixXd(batch.size(), 0);
    return assemble_inputs(shape, xt, batch.t, cond, spk);
}

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

}  // namespace

FrameSequence upsample_tokens(const FrameSequence& tokens, double ratio) {
    const Eigen::Index n = tokens.length();
    if (n < 2) throw Error(ErrorCode::kInvalidArgument, "upsample_tokens: need at least 2 frames");
    if (!(ratio > 0.0) || !std::isfinite(ratio)) {
        throw Error(ErrorCode::kInvalidArgument, "upsample_tokens: ratio must be positive");
    }
    const auto m = static_cast<Eigen::Index>(std::round(ratio * static_cast<double>(n)));
    if (m < 2) throw Error(ErrorCode::kInvalidArgument, "upsample_tokens: ratio yields fewer than 2 frames");

    FrameSequence out;
    out.frame_rate_hz = tokens.frame_rate_hz * ratio;
    out.frames.resize(m, tokens.width());
    for (Eigen::Index i = 0; i < m; ++i) {
        const double pos = static_cast<double>(i * (n - 1)) / static_cast<double>(m - 1);
        const auto lo = std::min<Eigen::Index>(static_cast<Eigen::Index>(pos), n - 1);
        const double frac = pos - static_cast<double>(lo);
        if (lo == n - 1 || frac == 0.0) {
            out.frames.row(i) = tokens.frames.row(lo);
        } else {
            out.frames.row(i) = (1.0 - frac) * tokens.frames.row(lo) + frac * tokens.frames.row(lo + 1);
        }
    }
    return out;
}

PathSample cfm_sample_path(const Eigen::VectorXd& x0, const Eigen::VectorXd& x1, double t) {
    if (x0.size() != x1.size()) throw Error(ErrorCode::kDimensionMismatch, "cfm_sample_path: x0 and x1 dims differ");
    if (!(t >= 0.0 && t <= 1.0)) throw Error(ErrorCode::kInvalidArgument, "cfm_sample_path: t outside [0, 1]");
    PathSample s;
    if (t == 0.0) {
        s.xt = x0;
    } else if (t == 1.0) {
        s.xt = x1;
    } else {
        s.xt = (1.0 - t) * x0 + t * x1;
    }
    s.target_velocity = x1 - x0;
    return s;
}

VectorFieldModel::VectorFieldModel(ModelShape shape, std::uint64_t seed) : shape_(std::move(shape)), seed_(seed) {
    if (shape_.state_dim == 0) throw Error(ErrorCode::kInvalidArgument, "model state_dim must be positive");
    std::vector<std::uint32_t> sizes{shape_.input_dim()};
    for (auto h : shape_.hidden) {
        if (h == 0) throw Error(ErrorCode::kInvalidArgument, "hidden layer width must be positive");
        sizes.push_back(h);
    }
    sizes.push_back(shape_.state_dim);

    std::mt19937_64 rng(seed);
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        const double limit = std::sqrt(6.0 / static_cast<double>(sizes[l] + sizes[l + 1]));
        std::uniform_real_distribution<double> dist(-limit, limit);
        Eigen::MatrixXd w(sizes[l + 1], sizes[l]);
        for (Eigen::Index r = 0; r < w.rows(); ++r) {
            for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = dist(rng);
        }
        weights_.push_back(std::move(w));
        biases_.push_back(Eigen::VectorXd::Zero(sizes[l + 1]));
    }
}

std::size_t VectorFieldModel::parameter_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < weights_.size(); ++l) n += weights_[l].size() + biases_[l].size();
    return n;
}

std::vector<double> VectorFieldModel::parameters() const {
    std::vector<double> out;
    out.reserve(parameter_count());
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        for (Eigen::Index r = 0; r < weights_[l].rows(); ++r) {
            for (Eigen::Index c = 0; c < weights_[l].cols(); ++c) out.push_back(weights_[l](r, c));
        }
        for (Eigen::Index i = 0; i < biases_[l].size(); ++i) out.push_back(biases_[l](i));
    }
    return out;
}

void VectorFieldModel::set_parameters(std::span<const double> params) {
    if (params.size() != parameter_count()) {
        throw Error(ErrorCode::kDimensionMismatch, "parameter block has " + std::to_string(params.size()) +
                                                       " values, model needs " + std::to_string(parameter_count()));
    }
    std::size_t k = 0;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        for (Eigen::Index r = 0; r < weights_[l].rows(); ++r) {
            for (Eigen::Index c = 0; c < weights_[l].cols(); ++c) weights_[l](r, c) = params[k++];
        }
        for (Eigen::Index i = 0; i < biases_[l].size(); ++i) biases_[l](i) = params[k++];
    }
}

Eigen::MatrixXd VectorFieldModel::forward(const Eigen::MatrixXd& inputs) const {
    if (inputs.cols() != shape_.input_dim()) {
        throw Error(ErrorCode::kDimensionMismatch, "model input has " + std::to_string(inputs.cols()) +
                                                       " columns, expected " + std::to_string(shape_.input_dim()));
    }
    return run_layers(weights_, biases_, inputs, nullptr);
}

Eigen::VectorXd vf_forward(const VectorFieldModel& model, const Eigen::VectorXd& xt, double t,
                           const Eigen::VectorXd& cond, const SpeakerEmbedding& spk) {
    Eigen::VectorXd tv(1);
    tv(0) = t;
    const auto in = assemble_inputs(model.shape(), xt.transpose(), tv, cond.transpose(), spk.transpose());
    return model.forward(in).row(0).transpose();
}

std::vector<double> Gradients::flatten() const {
    std::vector<double> out;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        for (Eigen::Index r = 0; r < weights[l].rows(); ++r) {
            for (Eigen::Index c = 0; c < weights[l].cols(); ++c) out.push_back(weights[l](r, c));
        }
        for (Eigen::Index i = 0; i < biases[l].size(); ++i) out.push_back(biases[l](i));
    }
    return out;
}

double vf_loss(const VectorFieldModel& model, const FlowBatch& batch) {
    Eigen::MatrixXd target;
    const auto in = batch_inputs(model.shape(), batch, target);
    const auto out = model.forward(in);
    return (out - target).cwiseAbs().sum() / static_cast<double>(out.size());
}

double vf_loss_and_gradient(const VectorFieldModel& model, const FlowBatch& batch, Gradients& grad) {
    Eigen::MatrixXd target;
    const auto in = batch_inputs(model.shape(), batch, target);

    const std::size_t layers = model.layer_count();
    std::vector<Eigen::MatrixXd> weights(layers);
    std::vector<Eigen::VectorXd> biases(layers);
    for (std::size_t l = 0; l < layers; ++l) {
        weights[l] = model.weight(l);
        biases[l] = model.bias(l);
    }
    ForwardTrace trace;
    const auto out = run_layers(weights, biases, in, &trace);
    const Eigen::MatrixXd residual = out - target;
    const double scale = 1.0 / static_cast<double>(residual.size());

    Eigen::MatrixXd delta = residual.unaryExpr(&sign) * scale;
    grad.weights.assign(layers, {});
    grad.biases.assign(layers, {});
    for (std::size_t l = layers; l-- > 0;) {
        const auto& a_prev = trace.activations[l];
        grad.weights[l] = delta.transpose() * a_prev;
        grad.biases[l] = delta.colwise().sum().transpose();
        if (l > 0) {
            delta = (delta * weights[l]).array() * (1.0 - a_prev.array().square());
        }
    }
    return residual.cwiseAbs().sum() * scale;
}

double vf_train_step(VectorFieldModel& model, const FlowBatch& batch, double learning_rate) {
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
        throw Error(ErrorCode::kInvalidArgument, "learning rate must be non-negative");
    }
    Gradients grad;
    const double loss = vf_loss_and_gradient(model, batch, grad);
    for (std::size_t l = 0; l < model.layer_count(); ++l) {
        if (!all_finite(grad.weights[l]) || !grad.biases[l].allFinite()) {
            throw Error(ErrorCode::kDivergence, "non-finite gradient in layer " + std::to_string(l));
        }
    }
    if (learning_rate == 0.0) return loss;
    for (std::size_t l = 0; l < model.layer_count(); ++l) {
        model.weight(l) -= learning_rate * grad.weights[l];
        model.bias(l) -= learning_rate * grad.biases[l];
    }
    return loss;
}

Eigen::MatrixXd ode_integrate(const VectorFieldModel& model, const Eigen::MatrixXd& x_init,
                              const Eigen::MatrixXd& cond, const Eigen::MatrixXd& spk, std::uint32_t n_steps) {
    if (n_steps == 0) throw Error(ErrorCode::kInvalidArgument, "ode_integrate: n_steps must be at least 1");
    const auto rows = x_init.rows();
    const Eigen::MatrixXd c = cond.cols() ? broadcast(cond, rows, "cond") : Eigen::MatrixXd(rows, 0);
    const Eigen::MatrixXd s = spk.cols() ? broadcast(spk, rows, "speaker") : Eigen::MatrixXd(rows, 0);
    const double dt = 1.0 / static_cast<double>(n_steps);
    Eigen::MatrixXd x = x_init;
    for (std::uint32_t k = 0; k < n_steps; ++k) {
        const Eigen::VectorXd t = Eigen::VectorXd::Constant(rows, static_cast<double>(k) * dt);
        x += dt * model.forward(assemble_inputs(model.shape(), x, t, c, s));
        if (!all_finite(x)) {
            throw Error(ErrorCode::kDivergence, "ode_integrate: non-finite state at step " + std::to_string(k));
        }
    }
    return x;
}

Eigen::VectorXd ode_integrate(const VectorFieldModel& model, const Eigen::VectorXd& x_init,
                              const Eigen::VectorXd& cond, const SpeakerEmbedding& spk, std::uint32_t n_steps) {
    return ode_integrate(model, Eigen::MatrixXd(x_init.transpose()), Eigen::MatrixXd(cond.transpose()),
                         Eigen::MatrixXd(spk.transpose()), n_steps)
        .row(0)
        .transpose();
}

FrameSequence generate_mel(const VectorFieldModel& model, const FrameSequence& tokens, const SpeakerEmbedding& spk,
                           std::uint32_t n_steps, std::uint64_t seed) {
    const auto& shape = model.shape();
    if (tokens.width() != shape.cond_dim) {
        throw Error(ErrorCode::kDimensionMismatch, "token frames have width " + std::to_string(tokens.width()) +
                                                       ", model conditions on " + std::to_string(shape.cond_dim));
    }
    if (spk.size() != shape.speaker_dim) {
        throw Error(ErrorCode::kDimensionMismatch, "speaker embedding has dim " + std::to_string(spk.size()) +
                                                       ", model expects " + std::to_string(shape.speaker_dim));
    }
    const auto up = upsample_tokens(tokens, kTokenToMelRatio);
    std::mt19937_64 rng(seed);
    const auto noise = standard_normal(up.length(), shape.state_dim, rng);
    FrameSequence mel;
    mel.frame_rate_hz = up.frame_rate_hz;
    mel.frames = ode_integrate(model, noise, up.frames, Eigen::MatrixXd(spk.transpose()), n_steps);
    return mel;
}

ModelShape ToyGaussianTask::shape(std::vector<std::uint32_t> hidden) const {
    return ModelShape{2, 0, 0, std::move(hidden)};
}

FlowBatch ToyGaussianTask::sample(std::size_t batch_size, std::mt19937_64& rng) const {
    const auto n = static_cast<Eigen::Index>(batch_size);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    FlowBatch b;
    b.x0 = standard_normal(n, 2, rng);
    b.x1 = standard_normal(n, 2, rng) * std::sqrt(var_);
    b.x1.rowwise() += mean_.transpose();
    b.t.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) b.t(i) = unit(rng);
    b.cond.resize(n, 0);
    b.spk.resize(n, 0);
    return b;
}

SyntheticTokenMelTask::SyntheticTokenMelTask(std::uint32_t token_dim, std::uint32_t mel_dim, std::uint32_t speaker_dim,
                                             std::uint32_t speakers, std::uint64_t seed) {
    if (token_dim == 0 || mel_dim == 0 || speakers == 0) {
        throw Error(ErrorCode::kInvalidArgument, "token/mel dims and speaker count must be positive");
    }
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    token_map_ = standard_normal(mel_dim, token_dim, rng) / std::sqrt(static_cast<double>(token_dim));
    speaker_map_ = speaker_dim ? Eigen::MatrixXd(standard_normal(mel_dim, speaker_dim, rng) * 0.5 /
                                                 std::sqrt(static_cast<double>(speaker_dim)))
                               : Eigen::MatrixXd(mel_dim, 0);
    offset_ = Eigen::VectorXd::LinSpaced(mel_dim, 1.0, -1.0);
    speakers_ = standard_normal(speakers, speaker_dim, rng);
}

ModelShape SyntheticTokenMelTask::shape(std::vector<std::uint32_t> hidden) const {
    return ModelShape{static_cast<std::uint32_t>(token_map_.rows()), static_cast<std::uint32_t>(token_map_.cols()),
                      static_cast<std::uint32_t>(speaker_map_.cols()), std::move(hidden)};
}

Eigen::VectorXd SyntheticTokenMelTask::target_for(const Eigen::VectorXd& cond, const Eigen::VectorXd& spk) const {
    Eigen::VectorXd y = token_map_ * cond + offset_;
    if (speaker_map_.cols()) y += speaker_map_ * spk;
    return y;
}

FlowBatch SyntheticTokenMelTask::sample(std::size_t batch_size, std::mt19937_64& rng) const {
    const auto n = static_cast<Eigen::Index>(batch_size);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<Eigen::Index> pick(0, speakers_.rows() - 1);
    FlowBatch b;
    b.cond = standard_normal(n, token_map_.cols(), rng);
    b.spk.resize(n, speakers_.cols());
    for (Eigen::Index i = 0; i < n; ++i) b.spk.row(i) = speakers_.row(pick(rng));
    b.x1 = b.cond * token_map_.transpose();
    if (speaker_map_.cols()) b.x1 += b.spk * speaker_map_.transpose();
    b.x1.rowwise() += offset_.transpose();
    b.x0 = standard_normal(n, token_map_.rows(), rng);
    b.t.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) b.t(i) = unit(rng);
    return b;
}

std::vector<double> train_flow_model(VectorFieldModel& model, const FlowTask& task, const FlowTrainConfig& config,
                                     const std::function<void(std::uint32_t, double)>& on_step) {
    if (!(config.learning_rate > 0.0) || config.batch_size == 0 || config.ode_steps == 0) {
        throw Error(ErrorCode::kInvalidArgument, "training config values must be positive");
    }
    std::mt19937_64 rng(config.seed);
    std::vector<double> losses;
    losses.reserve(config.steps);

    // Adam state, flattened in parameter order.
    constexpr double kBeta1 = 0.9;
    constexpr double kBeta2 = 0.999;
    constexpr double kEps = 1e-8;
    std::vector<double> m(model.parameter_count(), 0.0);
    std::vector<double> v(model.parameter_count(), 0.0);

    for (std::uint32_t step = 0; step < config.steps; ++step) {
        const auto batch = task.sample(config.batch_size, rng);
        double loss;
        if (config.optimizer == Optimizer::kSgd) {
            loss = vf_train_step(model, batch, config.learning_rate);
        } else {
            Gradients grad;
            loss = vf_loss_and_gradient(model, batch, grad);
            const auto g = grad.flatten();
            auto p = model.parameters();
            const double c1 = 1.0 - std::pow(kBeta1, step + 1);
            const double c2 = 1.0 - std::pow(kBeta2, step + 1);
            for (std::size_t i = 0; i < p.size(); ++i) {
                if (!std::isfinite(g[i])) {
                    throw Error(ErrorCode::kDivergence, "non-finite gradient at step " + std::to_string(step));
                }
                m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * g[i];
                v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * g[i] * g[i];
                p[i] -= config.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + kEps);
            }
            model.set_parameters(p);
        }
        losses.push_back(loss);
        if (on_step) on_step(step, loss);
    }
    return losses;
}

Eigen::MatrixXd sample_flow(const VectorFieldModel& model, std::size_t n_samples, std::uint32_t n_steps,
                            std::uint64_t seed) {
    const auto& shape = model.shape();
    if (shape.cond_dim || shape.speaker_dim) {
        throw Error(ErrorCode::kInvalidArgument, "sample_flow needs an unconditioned model");
    }
    std::mt19937_64 rng(seed);
    const auto x0 = standard_normal(static_cast<Eigen::Index>(n_samples), shape.state_dim, rng);
    const auto rows = x0.rows();
    return ode_integrate(model, x0, Eigen::MatrixXd(rows, 0), Eigen::MatrixXd(rows, 0), n_steps);
}

SpeakerEmbedding speaker_for_key(std::string_view key, std::uint32_t dim) {
    const auto digest = io::sha256(std::span(reinterpret_cast<const std::uint8_t*>(key.data()), key.size()));
    std::uint64_t seed = 0;
    for (int i = 0; i < 8; ++i) seed |= static_cast<std::uint64_t>(digest[i]) << (8 * i);
    std::mt19937_64 rng(seed);
    return standard_normal(dim, 1, rng).col(0);
}

void save_checkpoint(const VectorFieldModel& model, const std::filesystem::path& path) {
    const auto& s = model.shape();
    nlohmann::json header = {
        {"format", kCheckpointFormat},
        {"version", 1},
        {"state_dim", s.state_dim},
        {"cond_dim", s.cond_dim},
        {"speaker_dim", s.speaker_dim},
        {"hidden", s.hidden},
        {"activation", "tanh"},
        {"seed", model.seed()},
        {"param_count", model.parameter_count()},
    };
    io::ByteWriter w;
    w.raw(header.dump());
    w.u8('\n');
    for (double p : model.parameters()) w.f64(p);
    io::write_file_atomic(path, w.bytes());
}

namespace {

// Splits "<json>\n<binary>" and parses the header.
nlohmann::json split_header(std::span<const std::uint8_t> bytes, std::size_t& body_offset, const std::string& what) {
    const auto nl = std::find(bytes.begin(), bytes.end(), std::uint8_t{'\n'});
    if (nl == bytes.end()) throw Error(ErrorCode::kMalformedHeader, what + ": missing header line");
    body_offset = static_cast<std::size_t>(nl - bytes.begin()) + 1;
    try {
        return nlohmann::json::parse(bytes.begin(), nl);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::kMalformedHeader, what + ": " + e.what());
    }
}

}  // namespace

VectorFieldModel load_checkpoint(const std::filesystem::path& path) {
    const auto bytes = io::read_file(path);
    std::size_t offset = 0;
    const auto header = split_header(bytes, offset, "checkpoint '" + path.string() + "'");
    try {
        if (header.at("format").get<std::string>() != kCheckpointFormat) {
            throw Error(ErrorCode::kMalformedHeader, "'" + path.string() + "' is not a vector-field checkpoint");
        }
        ModelShape shape{header.at("state_dim").get<std::uint32_t>(), header.at("cond_dim").get<std::uint32_t>(),
                         header.at("speaker_dim").get<std::uint32_t>(),
                         header.at("hidden").get<std::vector<std::uint32_t>>()};
        VectorFieldModel model(shape, header.at("seed").get<std::uint64_t>());
        const auto count = header.at("param_count").get<std::size_t>();
        if (count != model.parameter_count() || bytes.size() - offset != count * 8) {
            throw Error(ErrorCode::kMalformedHeader, "checkpoint '" + path.string() + "' parameter block size mismatch");
        }
        io::ByteReader r{std::span<const std::uint8_t>(bytes).subspan(offset), "checkpoint parameters"};
        std::vector<double> params(count);
        for (auto& p : params) {
            p = r.f64();
            if (!std::isfinite(p)) throw Error(ErrorCode::kNonFinite, "checkpoint has a non-finite parameter");
        }
        model.set_parameters(params);
        return model;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::kMalformedHeader, "checkpoint '" + path.string() + "': " + e.what());
    }
}

io::Bytes encode_frames(const FrameSequence& seq) {
    nlohmann::json header = {
        {"format", kFramesFormat},
        {"T", seq.length()},
        {"D", seq.width()},
        {"frame_rate_hz", seq.frame_rate_hz},
    };
    io::ByteWriter w;
    w.raw(header.dump());
    w.u8('\n');
    for (Eigen::Index r = 0; r < seq.length(); ++r) {
        for (Eigen::Index c = 0; c < seq.width(); ++c) w.f64(seq.frames(r, c));
    }
    return w.take();
}

FrameSequence decode_frames(std::span<const std::uint8_t> bytes) {
    std::size_t offset = 0;
    const auto header = split_header(bytes, offset, "frame file");
    try {
        if (header.at("format").get<std::string>() != kFramesFormat) {
            throw Error(ErrorCode::kMalformedHeader, "not a frame file");
        }
        const auto rows = header.at("T").get<Eigen::Index>();
        const auto cols = header.at("D").get<Eigen::Index>();
        FrameSequence seq;
        seq.frame_rate_hz = header.at("frame_rate_hz").get<double>();
        if (rows < 0 || cols < 0 || !(seq.frame_rate_hz > 0.0)) {
            throw Error(ErrorCode::kMalformedHeader, "frame file header has invalid T, D or frame rate");
        }
        if (bytes.size() - offset != static_cast<std::size_t>(rows * cols) * 8) {
            throw Error(ErrorCode::kDimensionMismatch, "frame file body does not hold T x D values");
        }
        io::ByteReader r(bytes.subspan(offset), "frame body");
        seq.frames.resize(rows, cols);
        for (Eigen::Index i = 0; i < rows; ++i) {
            for (Eigen::Index j = 0; j < cols; ++j) seq.frames(i, j) = r.f64();
        }
        if (!seq.frames.allFinite()) throw Error(ErrorCode::kNonFinite, "frame file has non-finite values");
        return seq;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::kMalformedHeader, std::string("frame file: ") + e.what());
    }
}

void save_frames(const FrameSequence& seq, const std::filesystem::path& path) {
    io::write_file_atomic(path, encode_frames(seq));
}

FrameSequence load_frames(const std::filesystem::path& path) { return decode_frames(io::read_file(path)); }

}  // namespace emorag
