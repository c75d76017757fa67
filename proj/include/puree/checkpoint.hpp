#pragma once

// NET v1 checkpoints and loss-history CSV.
//
// Layout: ASCII "NET 1\n", then little-endian uint32 layer counts for
// encoder, decoder and head, then per layer: uint32 outputs, uint32 inputs,
// uint8 activation tag, float64 weights (row-major), float64 biases.

#include "puree/autoencoder.hpp"

#include <iosfwd>
#include <span>

namespace puree::nn {

void write_checkpoint(std::ostream& out, const NetworkParams& net);
/// Throws std::runtime_error on malformed input.
NetworkParams read_checkpoint(std::istream& in);

/// Columns `epoch, phase, loss`; epochs start at 1.
void write_loss_history(std::ostream& out, Phase phase, std::span<const double> history,
                        bool with_header = true);

}  // namespace puree::nn
