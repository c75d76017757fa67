#pragma once

// Fully-connected autoencoder with a softmax classification head.
//
//   encoder: input -> ... -> bottleneck        (relu)
//   decoder: bottleneck -> ... -> input        (relu hidden, sigmoid output)
//   head:    bottleneck -> classes             (softmax)
//
// Pretraining minimises reconstruction MSE through encoder + decoder;
// fine-tuning minimises cross-entropy through encoder + head and leaves the
// decoder untouched.

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace puree::nn {

enum class Activation : std::uint8_t { relu = 0, sigmoid = 1, linear = 2, softmax = 3 };

std::string_view to_string(Activation a);
Activation activation_from_string(std::string_view name);

struct LayerParams {
    Eigen::MatrixXd weights;  // outputs x inputs
    Eigen::VectorXd biases;
    Activation activation = Activation::linear;

    Eigen::Index inputs() const { return weights.cols(); }
    Eigen::Index outputs() const { return weights.rows(); }
};

using LayerStack = std::vector<LayerParams>;

struct NetworkParams {
    LayerStack encoder;
    LayerStack decoder;
    LayerStack head;

    Eigen::Index input_dim() const;
    Eigen::Index bottleneck_dim() const;
    Eigen::Index class_count() const;
};

/// Throws std::invalid_argument on inconsistent dimensions, non-finite values,
/// or a softmax anywhere but the last head layer.
void validate(const NetworkParams& net);

/// Same shapes as `net`, all zero.
NetworkParams zeros_like(const NetworkParams& net);

struct Architecture {
    Eigen::Index input_dim = 3750;
    std::vector<Eigen::Index> encoder_widths{512, 128};
    Eigen::Index classes = 5;
};

/// Weights ~ U(-s, s), s = sqrt(6 / (fan_in + fan_out)); biases zero.
NetworkParams init_network(const Architecture& arch, std::uint64_t seed);

/// Forward pass through a plain layer stack; columns of `x` are samples.
Eigen::MatrixXd forward_stack(const LayerStack& layers, const Eigen::MatrixXd& x);

Eigen::VectorXd forward_reconstruct(const NetworkParams& net, std::span<const double> x);
Eigen::VectorXd forward_classify(const NetworkParams& net, std::span<const double> x);

/// Index of the largest probability; ties go to the lowest index.
int argmax(std::span<const double> probabilities);
int predict(const NetworkParams& net, std::span<const double> x);

enum class Loss { mse, cross_entropy };

/// Columns of `inputs` are samples; `labels` is only read for cross-entropy.
struct Batch {
    Eigen::MatrixXd inputs;
    std::vector<int> labels;

    Eigen::Index size() const { return inputs.cols(); }
};

/// Mean over the batch. MSE also averages over output dimensions and uses
/// the inputs as targets.
double loss(const NetworkParams& net, const Batch& batch, Loss kind);

struct LossGradient {
    double loss = 0.0;
    NetworkParams gradient;  // zero for groups the loss does not reach
};

/// Exact gradient of the mean batch loss. Throws std::runtime_error on a
/// non-finite forward pass.
LossGradient backprop(const NetworkParams& net, const Batch& batch, Loss kind);

struct StackGradient {
    double loss = 0.0;
    LayerStack gradient;
};

/// Mean squared error of a bare stack against arbitrary targets.
StackGradient stack_mse_gradient(const LayerStack& layers, const Eigen::MatrixXd& inputs,
                                 const Eigen::MatrixXd& targets);

enum class Phase { pretrain, finetune };

std::string_view to_string(Phase p);

struct TrainConfig {
    int max_epochs = 400;
    int batch_size = 32;
    double learning_rate = 0.01;
    std::uint64_t seed = 0;
    Phase phase = Phase::pretrain;
};

struct TrainResult {
    NetworkParams params;
    /// Mean per-sample loss of each epoch.
    std::vector<double> loss_history;
};

class TrainingDiverged : public std::runtime_error {
public:
    TrainingDiverged(int epoch, const std::string& what)
        : std::runtime_error(what), epoch_(epoch) {}
    int epoch() const { return epoch_; }

private:
    int epoch_;
};

/// Mini-batch SGD. Sample order is reshuffled every epoch from a generator
/// seeded with cfg.seed, so the result is a pure function of the arguments.
TrainResult train(NetworkParams net, const Batch& dataset, const TrainConfig& cfg);

struct GradientCheckReport {
    double max_relative_error = 0.0;
    std::size_t parameter_count_checked = 0;
};

/// Relative errors are |analytic - numeric| / max(|analytic|, |numeric|, floor).
inline constexpr double kRelativeErrorFloor = 1e-7;

/// Compares backprop against central differences of step h on k randomly
/// chosen parameters from the groups the loss reaches.
GradientCheckReport gradient_check(const NetworkParams& net, const Batch& batch, Loss kind,
                                   double h, std::size_t k_params, std::uint64_t seed);

/// Flat parameter access: encoder, decoder, head; per layer weights
/// (column-major) then biases.
std::size_t parameter_count(const NetworkParams& net);
double& parameter(NetworkParams& net, std::size_t index);

}  // namespace puree::nn
