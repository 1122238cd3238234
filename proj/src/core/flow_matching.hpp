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
#include <functional>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "core/io.hpp"

namespace emorag {

// Time-major feature frames (rows are frames) at a fixed frame rate.
struct FrameSequence {
    Eigen::MatrixXd frames;
    double frame_rate_hz = 50.0;

    Eigen::Index length() const { return frames.rows(); }
    Eigen::Index width() const { return frames.cols(); }
};

using SpeakerEmbedding = Eigen::VectorXd;

inline constexpr double kTokenToMelRatio = 1.6;
inline constexpr std::uint32_t kDefaultMelDim = 80;
inline constexpr std::uint32_t kDefaultTokenDim = 16;
inline constexpr std::uint32_t kDefaultSpeakerDim = 8;
inline constexpr std::uint32_t kDefaultOdeSteps = 32;

// Linear interpolation onto round(ratio * T) frames with both endpoints kept.
FrameSequence upsample_tokens(const FrameSequence& tokens, double ratio = kTokenToMelRatio);

struct PathSample {
    Eigen::VectorXd xt;
    Eigen::VectorXd target_velocity;
};

// Straight conditional path between a noise sample and a data sample.
PathSample cfm_sample_path(const Eigen::VectorXd& x0, const Eigen::VectorXd& x1, double t);

struct ModelShape {
    std::uint32_t state_dim = 0;
    std::uint32_t cond_dim = 0;
    std::uint32_t speaker_dim = 0;
    std::vector<std::uint32_t> hidden;

    std::uint32_t input_dim() const { return state_dim + 1 + cond_dim + speaker_dim; }
    friend bool operator==(const ModelShape&, const ModelShape&) = default;
};

// Dense tanh regressor for the velocity field. Input layout per row is
// [state | t | conditioning | speaker]; the output layer is linear.
class VectorFieldModel {
public:
    VectorFieldModel() = default;
    // Parameters are drawn with Glorot-uniform scaling from `seed`; biases start at 0.
    VectorFieldModel(ModelShape shape, std::uint64_t seed);

    const ModelShape& shape() const noexcept { return shape_; }
    std::uint64_t seed() const noexcept { return seed_; }
    std::size_t layer_count() const noexcept { return weights_.size(); }

    // weight(l) has shape (out x in).
    Eigen::MatrixXd& weight(std::size_t l) { return weights_[l]; }
    const Eigen::MatrixXd& weight(std::size_t l) const { return weights_[l]; }
    Eigen::VectorXd& bias(std::size_t l) { return biases_[l]; }
    const Eigen::VectorXd& bias(std::size_t l) const { return biases_[l]; }

    std::size_t parameter_count() const;
    // Flattened as, per layer, W row-major then b.
    std::vector<double> parameters() const;
    void set_parameters(std::span<const double> params);

    // Rows of `inputs` are assembled input vectors; returns one velocity per row.
    Eigen::MatrixXd forward(const Eigen::MatrixXd& inputs) const;

    friend bool operator==(const VectorFieldModel&, const VectorFieldModel&) = default;

private:
    ModelShape shape_;
    std::uint64_t seed_ = 0;
    std::vector<Eigen::MatrixXd> weights_;
    std::vector<Eigen::VectorXd> biases_;
};

Eigen::VectorXd vf_forward(const VectorFieldModel& model, const Eigen::VectorXd& xt, double t,
                           const Eigen::VectorXd& cond, const SpeakerEmbedding& spk);

// Training batch, one sample per row. cond/spk may have zero columns.
struct FlowBatch {
    Eigen::MatrixXd x0;
    Eigen::MatrixXd x1;
    Eigen::VectorXd t;
    Eigen::MatrixXd cond;
    Eigen::MatrixXd spk;

    Eigen::Index size() const { return x0.rows(); }
};

struct Gradients {
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;

    std::vector<double> flatten() const;
};

// Mean absolute error between predicted and target velocity over all rows
// and dimensions.
double vf_loss(const VectorFieldModel& model, const FlowBatch& batch);
// Loss and its exact gradient; the L1 subgradient at a zero residual is 0.
double vf_loss_and_gradient(const VectorFieldModel& model, const FlowBatch& batch, Gradients& grad);
// One full-batch gradient-descent step. Returns the loss before the step.
double vf_train_step(VectorFieldModel& model, const FlowBatch& batch, double learning_rate);

// Explicit Euler from t=0 to t=1. x_init may hold several rows integrated
// independently; cond/spk rows broadcast when they have a single row.
Eigen::MatrixXd ode_integrate(const VectorFieldModel& model, const Eigen::MatrixXd& x_init,
                              const Eigen::MatrixXd& cond, const Eigen::MatrixXd& spk, std::uint32_t n_steps);
Eigen::VectorXd ode_integrate(const VectorFieldModel& model, const Eigen::VectorXd& x_init,
                              const Eigen::VectorXd& cond, const SpeakerEmbedding& spk, std::uint32_t n_steps);

FrameSequence generate_mel(const VectorFieldModel& model, const FrameSequence& tokens, const SpeakerEmbedding& spk,
                           std::uint32_t n_steps, std::uint64_t seed);

// Batches of (x0, x1, t, cond, spk) for training.
class FlowTask {
public:
    virtual ~FlowTask() = default;
    virtual ModelShape shape(std::vector<std::uint32_t> hidden) const = 0;
    virtual FlowBatch sample(std::size_t batch_size, std::mt19937_64& rng) const = 0;
};

// Source N(0, I) to target N(mean, var * I) in two dimensions, unconditioned.
class ToyGaussianTask : public FlowTask {
public:
    ToyGaussianTask(Eigen::Vector2d mean = {3.0, 3.0}, double variance = 0.25) : mean_(mean), var_(variance) {}
    ModelShape shape(std::vector<std::uint32_t> hidden) const override;
    FlowBatch sample(std::size_t batch_size, std::mt19937_64& rng) const override;

private:
    Eigen::Vector2d mean_;
    double var_;
};

// Token features c ~ N(0, I) and one of a few fixed speakers; the target mel
// frame is a fixed linear map of (c, speaker) plus a constant spectral tilt.
class SyntheticTokenMelTask : public FlowTask {
public:
    SyntheticTokenMelTask(std::uint32_t token_dim = kDefaultTokenDim, std::uint32_t mel_dim = kDefaultMelDim,
                          std::uint32_t speaker_dim = kDefaultSpeakerDim, std::uint32_t speakers = 4,
                          std::uint64_t seed = 0);
    ModelShape shape(std::vector<std::uint32_t> hidden) const override;
    FlowBatch sample(std::size_t batch_size, std::mt19937_64& rng) const override;

    Eigen::VectorXd target_for(const Eigen::VectorXd& cond, const Eigen::VectorXd& spk) const;
    const Eigen::MatrixXd& speakers() const { return speakers_; }

private:
    Eigen::MatrixXd token_map_;
    Eigen::MatrixXd speaker_map_;
    Eigen::VectorXd offset_;
    Eigen::MatrixXd speakers_;  // one speaker per row
};

enum class Optimizer { kSgd, kAdam };

struct FlowTrainConfig {
    double learning_rate = 1e-3;
    std::uint32_t batch_size = 64;
    std::uint32_t steps = 2000;
    std::uint32_t ode_steps = kDefaultOdeSteps;
    std::uint64_t seed = 0;
    Optimizer optimizer = Optimizer::kAdam;
};

// Runs config.steps updates on batches drawn from `task`. Returns the
// pre-update loss of every step.
std::vector<double> train_flow_model(VectorFieldModel& model, const FlowTask& task, const FlowTrainConfig& config,
                                     const std::function<void(std::uint32_t, double)>& on_step = {});

// Integrates n_samples fresh N(0, I) draws with an unconditioned model.
Eigen::MatrixXd sample_flow(const VectorFieldModel& model, std::size_t n_samples, std::uint32_t n_steps,
                            std::uint64_t seed);

// Deterministic speaker vector for a string key (e.g. a record id).
SpeakerEmbedding speaker_for_key(std::string_view key, std::uint32_t dim);

// Checkpoint: one JSON header line, then the raw f64 LE parameter block.
void save_checkpoint(const VectorFieldModel& model, const std::filesystem::path& path);
VectorFieldModel load_checkpoint(const std::filesystem::path& path);

// Frame artifact: one JSON header line {"T","D","frame_rate_hz"}, then the
// T x D f64 LE matrix row-major.
io::Bytes encode_frames(const FrameSequence& seq);
FrameSequence decode_frames(std::span<const std::uint8_t> bytes);
void save_frames(const FrameSequence& seq, const std::filesystem::path& path);
FrameSequence load_frames(const std::filesystem::path& path);

}  // namespace emorag
