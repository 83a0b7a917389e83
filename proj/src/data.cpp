#include "adler/data.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>

namespace adler {

SyntheticKind synthetic_kind_from_string(const std::string& s) {
    if (s == "gaussian_blobs") return SyntheticKind::GaussianBlobs;
    if (s == "two_spirals") return SyntheticKind::TwoSpirals;
    throw std::invalid_argument("unknown synthetic dataset kind '" + s + "'");
}

std::string synthetic_kind_to_string(SyntheticKind k) {
    return k == SyntheticKind::GaussianBlobs ? "gaussian_blobs" : "two_spirals";
}

Dataset gen_synthetic(SyntheticKind kind, std::size_t n, int c, double noise,
                      std::uint64_t seed) {
    if (noise < 0.0) throw std::invalid_argument("gen_synthetic: negative noise");
    if (c < 1 || n < (std::size_t)c)
        throw std::invalid_argument("gen_synthetic: need n >= c >= 1");
    Rng rng(seed);
    Dataset ds;
    constexpr double kPi = 3.14159265358979323846;
    if (kind == SyntheticKind::GaussianBlobs) {
        ds.num_classes = c;
        ds.inputs = Tensor::zeros({n, 2});
        ds.labels.resize(n);
        const double radius = 2.0;
        for (std::size_t i = 0; i < n; ++i) {
            const int label = (int)(i % (std::size_t)c);
            const double angle = 2.0 * kPi * (double)label / (double)c;
            ds.inputs.at2(i, 0) = radius * std::cos(angle) + noise * rng.next_normal();
            ds.inputs.at2(i, 1) = radius * std::sin(angle) + noise * rng.next_normal();
            ds.labels[i] = label;
        }
        return ds;
    }
    // Two interleaved spiral arms, class = arm.
    ds.num_classes = 2;
    ds.inputs = Tensor::zeros({n, 2});
    ds.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const int arm = (int)(i % 2);
        const double t = rng.next_uniform();            // position along the arm
        const double r = 0.2 + 2.0 * t;                 // radius grows outward
        const double phi = 3.0 * kPi * t + (arm == 1 ? kPi : 0.0);
        ds.inputs.at2(i, 0) = r * std::cos(phi) + noise * rng.next_normal();
        ds.inputs.at2(i, 1) = r * std::sin(phi) + noise * rng.next_normal();
        ds.labels[i] = arm;
    }
    return ds;
}

namespace {

std::uint32_t read_be32(std::ifstream& f, const std::string& path) {
    unsigned char buf[4];
    if (!f.read(reinterpret_cast<char*>(buf), 4))
        throw std::runtime_error("idx: truncated header in " + path);
    return ((std::uint32_t)buf[0] << 24) | ((std::uint32_t)buf[1] << 16) |
           ((std::uint32_t)buf[2] << 8) | (std::uint32_t)buf[3];
}

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream img(images_path, std::ios::binary);
    if (!img) throw std::runtime_error("idx: cannot open images file " + images_path);
    std::ifstream lab(labels_path, std::ios::binary);
    if (!lab) throw std::runtime_error("idx: cannot open labels file " + labels_path);

    const std::uint32_t img_magic = read_be32(img, images_path);
    if (img_magic != 0x00000803u)
        throw std::runtime_error("idx: bad magic in " + images_path + " (expected 0x00000803)");
    const std::uint32_t n = read_be32(img, images_path);
    const std::uint32_t rows = read_be32(img, images_path);
    const std::uint32_t cols = read_be32(img, images_path);

    const std::uint32_t lab_magic = read_be32(lab, labels_path);
    if (lab_magic != 0x00000801u)
        throw std::runtime_error("idx: bad magic in " + labels_path + " (expected 0x00000801)");
    const std::uint32_t n_lab = read_be32(lab, labels_path);
    if (n != n_lab)
        throw std::runtime_error("idx: image count " + std::to_string(n) +
                                 " does not match label count " + std::to_string(n_lab));

    Dataset ds;
    ds.inputs = Tensor::zeros({n, 1, rows, cols});
    ds.labels.resize(n);
    std::vector<unsigned char> pix((std::size_t)rows * cols);
    int max_label = 0;
    for (std::uint32_t i = 0; i < n; ++i) {
        if (!img.read(reinterpret_cast<char*>(pix.data()), (std::streamsize)pix.size()))
            throw std::runtime_error("idx: truncated image data in " + images_path);
        for (std::size_t p = 0; p < pix.size(); ++p)
            ds.inputs.data[(std::size_t)i * pix.size() + p] = (double)pix[p] / 255.0;
        char l;
        if (!lab.read(&l, 1)) throw std::runtime_error("idx: truncated label data in " + labels_path);
        ds.labels[i] = (int)(unsigned char)l;
        max_label = std::max(max_label, ds.labels[i]);
    }
    ds.num_classes = max_label + 1;
    return ds;
}

Batch make_batch(const Dataset& dataset, const std::vector<std::size_t>& indices, LossKind loss) {
    if (indices.empty()) throw std::invalid_argument("make_batch: empty index set");
    std::vector<std::size_t> shape = dataset.inputs.shape;
    shape[0] = indices.size();
    const std::size_t row = dataset.inputs.size() / dataset.inputs.shape[0];
    Batch batch;
    batch.inputs = Tensor::zeros(shape);
    for (std::size_t i = 0; i < indices.size(); ++i)
        for (std::size_t j = 0; j < row; ++j)
            batch.inputs.data[i * row + j] = dataset.inputs.data[indices[i] * row + j];
    if (loss == LossKind::SoftmaxCrossEntropy) {
        batch.labels.reserve(indices.size());
        for (std::size_t idx : indices) batch.labels.push_back(dataset.labels[idx]);
    } else {
        batch.targets = Tensor::zeros({indices.size(), (std::size_t)dataset.num_classes});
        for (std::size_t i = 0; i < indices.size(); ++i)
            batch.targets.at2(i, (std::size_t)dataset.labels[indices[i]]) = 1.0;
    }
    return batch;
}

Batch full_batch(const Dataset& dataset, LossKind loss) {
    std::vector<std::size_t> idx(dataset.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    return make_batch(dataset, idx, loss);
}

std::vector<Batch> epoch_batches(const Dataset& dataset, std::size_t b, Rng& rng, LossKind loss) {
    const std::size_t n = dataset.size();
    if (b < 1 || b > n)
        throw std::invalid_argument("epoch_batches: batch size " + std::to_string(b) +
                                    " out of range for n=" + std::to_string(n));
    std::vector<std::size_t> perm = rng.permutation(n);
    std::vector<Batch> batches;
    batches.reserve(n / b);
    for (std::size_t start = 0; start + b <= n; start += b) {
        std::vector<std::size_t> idx(perm.begin() + (std::ptrdiff_t)start,
                                     perm.begin() + (std::ptrdiff_t)(start + b));
        batches.push_back(make_batch(dataset, idx, loss));
    }
    return batches;
}

}  // namespace adler
