#include "puree/checkpoint.hpp"

#include "puree/csv.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

namespace puree::nn {

namespace {

template <class T>
void put_le(std::ostream& out, T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    char bytes[sizeof(T)];
    std::memcpy(bytes, &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
    out.write(bytes, sizeof(T));
}

template <class T>
T get_le(std::istream& in) {
    char bytes[sizeof(T)];
    if (!in.read(bytes, sizeof(T))) throw std::runtime_error("NET: truncated checkpoint");
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
    T v;
    std::memcpy(&v, bytes, sizeof(T));
    return v;
}

constexpr std::uint32_t kMaxWidth = 1u << 20;

}  // namespace

void write_checkpoint(std::ostream& out, const NetworkParams& net) {
    validate(net);
    out << "NET 1\n";
    for (const LayerStack* stack : {&net.encoder, &net.decoder, &net.head}) {
        put_le(out, static_cast<std::uint32_t>(stack->size()));
    }
    for (const LayerStack* stack : {&net.encoder, &net.decoder, &net.head}) {
        for (const auto& layer : *stack) {
            put_le(out, static_cast<std::uint32_t>(layer.outputs()));
            put_le(out, static_cast<std::uint32_t>(layer.inputs()));
            put_le(out, static_cast<std::uint8_t>(layer.activation));
            for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
                for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) put_le(out, layer.weights(r, c));
            }
            for (Eigen::Index r = 0; r < layer.biases.size(); ++r) put_le(out, layer.biases(r));
        }
    }
}

NetworkParams read_checkpoint(std::istream& in) {
    std::string magic;
    if (!std::getline(in, magic) || magic != "NET 1") throw std::runtime_error("not a NET v1 checkpoint");
    std::uint32_t counts[3];
    for (auto& c : counts) c = get_le<std::uint32_t>(in);

    NetworkParams net;
    LayerStack* stacks[3] = {&net.encoder, &net.decoder, &net.head};
    for (int s = 0; s < 3; ++s) {
        for (std::uint32_t l = 0; l < counts[s]; ++l) {
            const auto outputs = get_le<std::uint32_t>(in);
            const auto inputs = get_le<std::uint32_t>(in);
            const auto tag = get_le<std::uint8_t>(in);
            if (outputs == 0 || inputs == 0 || outputs > kMaxWidth || inputs > kMaxWidth) {
                throw std::runtime_error("NET: implausible layer dimensions");
            }
            if (tag > static_cast<std::uint8_t>(Activation::softmax)) {
                throw std::runtime_error("NET: unknown activation tag");
            }
            LayerParams layer;
            layer.activation = static_cast<Activation>(tag);
            layer.weights.resize(outputs, inputs);
            for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
                for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) layer.weights(r, c) = get_le<double>(in);
            }
            layer.biases.resize(outputs);
            for (Eigen::Index r = 0; r < layer.biases.size(); ++r) layer.biases(r) = get_le<double>(in);
            stacks[s]->push_back(std::move(layer));
        }
    }
    try {
        validate(net);
    } catch (const std::invalid_argument& e) {
        throw std::runtime_error(std::string("NET: ") + e.what());
    }
    return net;
}

void write_loss_history(std::ostream& out, Phase phase, std::span<const double> history, bool with_header) {
    if (with_header) out << "epoch,phase,loss\n";
    for (std::size_t i = 0; i < history.size(); ++i) {
        out << i + 1 << ',' << to_string(phase) << ',' << csv::number(history[i], 17) << '\n';
    }
}

}  // namespace puree::nn
