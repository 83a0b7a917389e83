#pragma once

#include <string>
#include <vector>

#include "adler/losses.hpp"
#include "adler/tensor.hpp"

namespace adler {

/// Labeled dataset. Inputs keep their natural shape ([n x d] or
/// [n x c x h x w]); targets are class indices.
struct Dataset {
    Tensor inputs;
    std::vector<int> labels;
    int num_classes = 0;

    std::size_t size() const { return labels.size(); }
};

enum class SyntheticKind { GaussianBlobs, TwoSpirals };

SyntheticKind synthetic_kind_from_string(const std::string& s);
std::string synthetic_kind_to_string(SyntheticKind k);

/// Deterministic labeled 2-D point clouds. Blobs: c Gaussian clusters on a
/// circle. Spirals: two interleaved arms (c is forced to 2).
Dataset gen_synthetic(SyntheticKind kind, std::size_t n, int c, double noise,
                      std::uint64_t seed);

/// Parses a big-endian IDX image/label file pair (magic 0x00000803 /
/// 0x00000801, u8 payloads). Pixels scaled to [0,1], shape [n x 1 x h x w].
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

/// One epoch of minibatches: a seeded shuffle, consecutive chunks of size b,
/// last short chunk dropped. Targets are class labels (cross-entropy) or
/// one-hot rows (mse) depending on the loss.
std::vector<Batch> epoch_batches(const Dataset& dataset, std::size_t b, Rng& rng, LossKind loss);

/// Single batch over explicit indices, in order.
Batch make_batch(const Dataset& dataset, const std::vector<std::size_t>& indices, LossKind loss);

/// Whole dataset as one batch, in storage order.
Batch full_batch(const Dataset& dataset, LossKind loss);

}  // namespace adler
