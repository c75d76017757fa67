#include "puree/autoencoder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

namespace puree::nn {

std::string_view to_string(Activation a) {
    switch (a) {
        case Activation::relu: return "relu";
        case Activation::sigmoid: return "sigmoid";
        case Activation::linear: return "linear";
        case Activation::softmax: return "softmax";
    }
    return "unknown";
}

Activation activation_from_string(std::string_view name) {
    for (auto a : {Activation::relu, Activation::sigmoid, Activation::linear, Activation::softmax}) {
        if (to_string(a) == name) return a;
    }
    throw std::invalid_argument("unknown activation '" + std::string(name) + "'");
}

std::string_view to_string(Phase p) {
    return p == Phase::pretrain ? "pretrain" : "finetune";
}

Eigen::Index NetworkParams::input_dim() const {
    return encoder.empty() ? 0 : encoder.front().inputs();
}

Eigen::Index NetworkParams::bottleneck_dim() const {
    return encoder.empty() ? 0 : encoder.back().outputs();
}

Eigen::Index NetworkParams::class_count() const {
    return head.empty() ? 0 : head.back().outputs();
}

namespace {

void validate_stack(const LayerStack& layers, const char* name, Eigen::Index input_dim) {
    Eigen::Index expected = input_dim;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& layer = layers[l];
        std::ostringstream where;
        where << name << " layer " << l;
        if (layer.inputs() != expected) {
            throw std::invalid_argument(where.str() + ": input width does not chain");
        }
        if (layer.biases.size() != layer.outputs() || layer.outputs() == 0) {
            throw std::invalid_argument(where.str() + ": bias length differs from outputs");
        }
        if (!layer.weights.allFinite() || !layer.biases.allFinite()) {
            throw std::invalid_argument(where.str() + ": non-finite parameters");
        }
        expected = layer.outputs();
    }
}

}  // namespace

void validate(const NetworkParams& net) {
    if (net.encoder.empty() || net.decoder.empty() || net.head.empty()) {
        throw std::invalid_argument("network needs encoder, decoder and head layers");
    }
    validate_stack(net.encoder, "encoder", net.input_dim());
    validate_stack(net.decoder, "decoder", net.bottleneck_dim());
    validate_stack(net.head, "head", net.bottleneck_dim());
    if (net.decoder.back().outputs() != net.input_dim()) {
        throw std::invalid_argument("decoder output width differs from encoder input width");
    }
    for (const LayerStack* stack : {&net.encoder, &net.decoder}) {
        for (const auto& layer : *stack) {
            if (layer.activation == Activation::softmax) {
                throw std::invalid_argument("softmax is only allowed as the final head layer");
            }
        }
    }
    for (std::size_t l = 0; l + 1 < net.head.size(); ++l) {
        if (net.head[l].activation == Activation::softmax) {
            throw std::invalid_argument("softmax is only allowed as the final head layer");
        }
    }
}

NetworkParams zeros_like(const NetworkParams& net) {
    NetworkParams out = net;
    for (LayerStack* stack : {&out.encoder, &out.decoder, &out.head}) {
        for (auto& layer : *stack) {
            layer.weights.setZero();
            layer.biases.setZero();
        }
    }
    return out;
}

NetworkParams init_network(const Architecture& arch, std::uint64_t seed) {
    if (arch.input_dim < 1 || arch.encoder_widths.empty() || arch.classes < 1) {
        throw std::invalid_argument("architecture needs an input, at least one encoder layer and classes");
    }
    for (auto w : arch.encoder_widths) {
        if (w < 1) throw std::invalid_argument("layer widths must be positive");
    }
    std::mt19937_64 rng(seed);
    const auto make = [&rng](Eigen::Index in, Eigen::Index out, Activation act) {
        const double s = std::sqrt(6.0 / static_cast<double>(in + out));
        std::uniform_real_distribution<double> u(-s, s);
        LayerParams layer;
        layer.weights.resize(out, in);
        for (Eigen::Index k = 0; k < layer.weights.size(); ++k) layer.weights.data()[k] = u(rng);
        layer.biases = Eigen::VectorXd::Zero(out);
        layer.activation = act;
        return layer;
    };

    NetworkParams net;
    std::vector<Eigen::Index> dims{arch.input_dim};
    dims.insert(dims.end(), arch.encoder_widths.begin(), arch.encoder_widths.end());
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        net.encoder.push_back(make(dims[l], dims[l + 1], Activation::relu));
    }
    for (std::size_t l = dims.size() - 1; l > 0; --l) {
        net.decoder.push_back(make(dims[l], dims[l - 1], l == 1 ? Activation::sigmoid : Activation::relu));
    }
    net.head.push_back(make(dims.back(), arch.classes, Activation::softmax));
    return net;
}

namespace {

void softmax_columns(Eigen::MatrixXd& z) {
    for (Eigen::Index j = 0; j < z.cols(); ++j) {
        auto col = z.col(j);
        col.array() = (col.array() - col.maxCoeff()).exp();
        col /= col.sum();
    }
}

Eigen::MatrixXd activate(Activation a, const Eigen::MatrixXd& z) {
    switch (a) {
        case Activation::relu: return z.cwiseMax(0.0);
        case Activation::sigmoid: return (1.0 + (-z.array()).exp()).inverse().matrix();
        case Activation::linear: return z;
        case Activation::softmax: {
            Eigen::MatrixXd p = z;
            softmax_columns(p);
            return p;
        }
    }
    return z;
}

// Maps dL/d(output) to dL/d(pre-activation).
Eigen::MatrixXd activation_backward(Activation a, const Eigen::MatrixXd& pre,
                                    const Eigen::MatrixXd& post, const Eigen::MatrixXd& grad) {
    switch (a) {
        case Activation::relu: return (pre.array() > 0.0).select(grad, 0.0);
        case Activation::sigmoid: return (grad.array() * post.array() * (1.0 - post.array())).matrix();
        case Activation::linear: return grad;
        case Activation::softmax: {
            const Eigen::RowVectorXd dot = (post.array() * grad.array()).colwise().sum();
            return (post.array() * (grad.rowwise() - dot).array()).matrix();
        }
    }
    return grad;
}

struct Trace {
    const Eigen::MatrixXd* input = nullptr;
    std::vector<Eigen::MatrixXd> pre;
    std::vector<Eigen::MatrixXd> post;

    const Eigen::MatrixXd& output() const { return post.empty() ? *input : post.back(); }
    const Eigen::MatrixXd& layer_input(std::size_t l) const { return l == 0 ? *input : post[l - 1]; }
};

Trace run_forward(const LayerStack& layers, const Eigen::MatrixXd& x) {
    Trace t;
    t.input = &x;
    t.pre.reserve(layers.size());
    t.post.reserve(layers.size());
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& layer = layers[l];
        if (t.layer_input(l).rows() != layer.inputs()) {
            throw std::invalid_argument("input dimension does not match the first layer");
        }
        t.pre.push_back((layer.weights * t.layer_input(l)).colwise() + layer.biases);
        t.post.push_back(activate(layer.activation, t.pre.back()));
    }
    if (!t.output().allFinite()) throw std::runtime_error("non-finite value in forward pass");
    return t;
}

// Fills `grads` and returns dL/d(stack input) when requested. `delta` is
// dL/d(output), or dL/d(pre-activation of the last layer) if delta_is_pre.
Eigen::MatrixXd run_backward(const LayerStack& layers, const Trace& t, Eigen::MatrixXd delta,
                             bool delta_is_pre, LayerStack& grads, bool want_input_grad) {
    for (std::size_t l = layers.size(); l-- > 0;) {
        const auto& layer = layers[l];
        if (!(delta_is_pre && l + 1 == layers.size())) {
            delta = activation_backward(layer.activation, t.pre[l], t.post[l], delta);
        }
        grads[l].weights.noalias() = delta * t.layer_input(l).transpose();
        grads[l].biases = delta.rowwise().sum();
        if (l > 0 || want_input_grad) delta = layer.weights.transpose() * delta;
    }
    return delta;
}

void check_batch(const NetworkParams& net, const Batch& batch, Loss kind) {
    if (batch.size() == 0) throw std::invalid_argument("empty batch");
    if (batch.inputs.rows() != net.input_dim()) {
        throw std::invalid_argument("batch dimension does not match network input");
    }
    if (kind == Loss::cross_entropy) {
        if (static_cast<Eigen::Index>(batch.labels.size()) != batch.size()) {
            throw std::invalid_argument("cross-entropy batch needs one label per sample");
        }
        for (int label : batch.labels) {
            if (label < 0 || label >= net.class_count()) {
                throw std::invalid_argument("label outside the class range");
            }
        }
        if (net.head.back().activation != Activation::softmax) {
            throw std::invalid_argument("cross-entropy needs a softmax head");
        }
    }
}

// Column-wise log-softmax of the logits.
Eigen::MatrixXd log_softmax(const Eigen::MatrixXd& z) {
    Eigen::MatrixXd out = z;
    for (Eigen::Index j = 0; j < z.cols(); ++j) {
        auto col = out.col(j);
        const double m = col.maxCoeff();
        const double lse = m + std::log((col.array() - m).exp().sum());
        col.array() -= lse;
    }
    return out;
}

LossGradient evaluate(const NetworkParams& net, const Batch& batch, Loss kind, bool with_gradient) {
    check_batch(net, batch, kind);
    const double n = static_cast<double>(batch.size());
    LossGradient out;
    if (with_gradient) out.gradient = zeros_like(net);

    const Trace enc = run_forward(net.encoder, batch.inputs);
    Eigen::MatrixXd bottleneck_grad;
    if (kind == Loss::mse) {
        const Trace dec = run_forward(net.decoder, enc.output());
        const Eigen::MatrixXd diff = dec.output() - batch.inputs;
        const double scale = n * static_cast<double>(diff.rows());
        out.loss = diff.squaredNorm() / scale;
        if (!with_gradient) return out;
        bottleneck_grad = run_backward(net.decoder, dec, (2.0 / scale) * diff, false,
                                       out.gradient.decoder, true);
    } else {
        const Trace head = run_forward(net.head, enc.output());
        const Eigen::MatrixXd logp = log_softmax(head.pre.back());
        Eigen::MatrixXd delta = head.output();
        double total = 0.0;
        for (Eigen::Index j = 0; j < batch.size(); ++j) {
            total -= logp(batch.labels[j], j);
            delta(batch.labels[j], j) -= 1.0;
        }
        out.loss = total / n;
        if (!with_gradient) return out;
        bottleneck_grad = run_backward(net.head, head, delta / n, true, out.gradient.head, true);
    }
    run_backward(net.encoder, enc, std::move(bottleneck_grad), false, out.gradient.encoder, false);
    return out;
}

}  // namespace

Eigen::MatrixXd forward_stack(const LayerStack& layers, const Eigen::MatrixXd& x) {
    Trace t = run_forward(layers, x);
    return t.post.empty() ? x : std::move(t.post.back());
}

Eigen::VectorXd forward_reconstruct(const NetworkParams& net, std::span<const double> x) {
    const Eigen::MatrixXd in = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
    if (in.rows() != net.input_dim()) throw std::invalid_argument("input dimension mismatch");
    return forward_stack(net.decoder, forward_stack(net.encoder, in));
}

Eigen::VectorXd forward_classify(const NetworkParams& net, std::span<const double> x) {
    const Eigen::MatrixXd in = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
    if (in.rows() != net.input_dim()) throw std::invalid_argument("input dimension mismatch");
    return forward_stack(net.head, forward_stack(net.encoder, in));
}

int argmax(std::span<const double> probabilities) {
    if (probabilities.empty()) throw std::invalid_argument("argmax of an empty vector");
    return static_cast<int>(std::max_element(probabilities.begin(), probabilities.end()) -
                            probabilities.begin());
}

int predict(const NetworkParams& net, std::span<const double> x) {
    const Eigen::VectorXd p = forward_classify(net, x);
    return argmax(std::span<const double>(p.data(), static_cast<std::size_t>(p.size())));
}

double loss(const NetworkParams& net, const Batch& batch, Loss kind) {
    return evaluate(net, batch, kind, false).loss;
}

LossGradient backprop(const NetworkParams& net, const Batch& batch, Loss kind) {
    return evaluate(net, batch, kind, true);
}

StackGradient stack_mse_gradient(const LayerStack& layers, const Eigen::MatrixXd& inputs,
                                 const Eigen::MatrixXd& targets) {
    if (inputs.cols() == 0) throw std::invalid_argument("empty batch");
    const Trace t = run_forward(layers, inputs);
    const Eigen::MatrixXd diff = t.output() - targets;
    if (diff.rows() != targets.rows() || diff.cols() != targets.cols()) {
        throw std::invalid_argument("target shape differs from stack output");
    }
    const double scale = static_cast<double>(diff.size());
    StackGradient out;
    out.loss = diff.squaredNorm() / scale;
    out.gradient = layers;
    run_backward(layers, t, (2.0 / scale) * diff, false, out.gradient, false);
    return out;
}

namespace {

void sgd_step(LayerStack& params, const LayerStack& grads, double lr) {
    for (std::size_t l = 0; l < params.size(); ++l) {
        params[l].weights.noalias() -= lr * grads[l].weights;
        params[l].biases.noalias() -= lr * grads[l].biases;
    }
}

}  // namespace

TrainResult train(NetworkParams net, const Batch& dataset, const TrainConfig& cfg) {
    validate(net);
    if (cfg.max_epochs < 1) throw std::invalid_argument("max_epochs must be >= 1");
    if (cfg.batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (!(cfg.learning_rate >= 0.0) || !std::isfinite(cfg.learning_rate)) {
        throw std::invalid_argument("learning_rate must be finite and >= 0");
    }
    const Loss kind = cfg.phase == Phase::pretrain ? Loss::mse : Loss::cross_entropy;
    check_batch(net, dataset, kind);

    std::mt19937_64 rng(cfg.seed);
    std::vector<Eigen::Index> order(static_cast<std::size_t>(dataset.size()));
    std::iota(order.begin(), order.end(), Eigen::Index{0});

    TrainResult result;
    result.loss_history.reserve(static_cast<std::size_t>(cfg.max_epochs));
    Batch mini;
    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double total = 0.0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            const std::vector<Eigen::Index> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                                order.begin() + static_cast<std::ptrdiff_t>(stop));
            mini.inputs = dataset.inputs(Eigen::all, idx);
            mini.labels.clear();
            if (kind == Loss::cross_entropy) {
                for (auto i : idx) mini.labels.push_back(dataset.labels[static_cast<std::size_t>(i)]);
            }

            LossGradient step;
            try {
                step = backprop(net, mini, kind);
            } catch (const std::runtime_error& e) {
                throw TrainingDiverged(epoch, "training diverged at epoch " + std::to_string(epoch) +
                                                  ": " + e.what());
            }
            if (!std::isfinite(step.loss)) {
                throw TrainingDiverged(epoch, "training loss is not finite at epoch " + std::to_string(epoch));
            }
            total += step.loss * static_cast<double>(idx.size());

            sgd_step(net.encoder, step.gradient.encoder, cfg.learning_rate);
            if (cfg.phase == Phase::pretrain) {
                sgd_step(net.decoder, step.gradient.decoder, cfg.learning_rate);
            } else {
                sgd_step(net.head, step.gradient.head, cfg.learning_rate);
            }
        }
        result.loss_history.push_back(total / static_cast<double>(order.size()));
    }
    result.params = std::move(net);
    return result;
}

namespace {

std::size_t stack_size(const LayerStack& stack) {
    std::size_t n = 0;
    for (const auto& layer : stack) n += static_cast<std::size_t>(layer.weights.size() + layer.biases.size());
    return n;
}

}  // namespace

std::size_t parameter_count(const NetworkParams& net) {
    return stack_size(net.encoder) + stack_size(net.decoder) + stack_size(net.head);
}

double& parameter(NetworkParams& net, std::size_t index) {
    for (LayerStack* stack : {&net.encoder, &net.decoder, &net.head}) {
        for (auto& layer : *stack) {
            const auto nw = static_cast<std::size_t>(layer.weights.size());
            if (index < nw) return layer.weights.data()[index];
            index -= nw;
            const auto nb = static_cast<std::size_t>(layer.biases.size());
            if (index < nb) return layer.biases.data()[index];
            index -= nb;
        }
    }
    throw std::out_of_range("parameter index out of range");
}

GradientCheckReport gradient_check(const NetworkParams& net, const Batch& batch, Loss kind,
                                   double h, std::size_t k_params, std::uint64_t seed) {
    if (!(h > 0.0) || !std::isfinite(h)) throw std::invalid_argument("finite-difference step must be > 0");
    if (k_params < 1) throw std::invalid_argument("gradient check needs at least one parameter");
    validate(net);

    // Candidate coordinates: the encoder plus the group the loss reaches.
    const std::size_t enc = stack_size(net.encoder);
    const std::size_t dec = stack_size(net.decoder);
    std::vector<std::size_t> candidates(enc);
    std::iota(candidates.begin(), candidates.end(), std::size_t{0});
    const std::size_t extra_begin = kind == Loss::mse ? enc : enc + dec;
    const std::size_t extra_size = kind == Loss::mse ? dec : stack_size(net.head);
    for (std::size_t i = 0; i < extra_size; ++i) candidates.push_back(extra_begin + i);

    std::vector<std::size_t> chosen;
    std::mt19937_64 rng(seed);
    std::sample(candidates.begin(), candidates.end(), std::back_inserter(chosen),
                static_cast<std::ptrdiff_t>(std::min(k_params, candidates.size())), rng);

    LossGradient analytic = backprop(net, batch, kind);
    NetworkParams probe = net;
    GradientCheckReport report;
    for (std::size_t idx : chosen) {
        double& p = parameter(probe, idx);
        const double original = p;
        p = original + h;
        const double up = loss(probe, batch, kind);
        p = original - h;
        const double down = loss(probe, batch, kind);
        p = original;

        const double numeric = (up - down) / (2.0 * h);
        const double exact = parameter(analytic.gradient, idx);
        const double denom = std::max({std::abs(exact), std::abs(numeric), kRelativeErrorFloor});
        report.max_relative_error = std::max(report.max_relative_error, std::abs(exact - numeric) / denom);
        ++report.parameter_count_checked;
    }
    return report;
}

}  // namespace puree::nn
