#include "adler/losses.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace adler {

namespace {

void check_preds(const Tensor& preds, const Batch& batch, LossKind kind) {
    if (preds.rank() != 2)
        throw std::invalid_argument("loss: predictions must be [b x c], got " +
                                    shape_str(preds.shape));
    if (!preds.all_finite()) {
        for (double x : preds.data)
            if (!std::isfinite(x))
                throw std::runtime_error("loss: non-finite prediction value " + std::to_string(x));
    }
    const std::size_t b = preds.shape[0], c = preds.shape[1];
    if (kind == LossKind::SoftmaxCrossEntropy) {
        if (batch.labels.size() != b)
            throw std::invalid_argument("cross-entropy: " + std::to_string(batch.labels.size()) +
                                        " labels for batch of " + std::to_string(b));
        for (int y : batch.labels)
            if (y < 0 || (std::size_t)y >= c)
                throw std::invalid_argument("cross-entropy: label " + std::to_string(y) +
                                            " out of range for " + std::to_string(c) + " classes");
    } else {
        if (!batch.targets.same_shape(preds))
            throw std::invalid_argument("mse: target shape " + shape_str(batch.targets.shape) +
                                        " does not match predictions " + shape_str(preds.shape));
    }
}

}  // namespace

Tensor softmax_rows(const Tensor& logits) {
    const std::size_t b = logits.shape[0], c = logits.shape[1];
    Tensor p = Tensor::zeros(logits.shape);
    for (std::size_t k = 0; k < b; ++k) {
        double m = logits.at2(k, 0);
        for (std::size_t j = 1; j < c; ++j) m = std::max(m, logits.at2(k, j));
        double z = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            p.at2(k, j) = std::exp(logits.at2(k, j) - m);
            z += p.at2(k, j);
        }
        for (std::size_t j = 0; j < c; ++j) p.at2(k, j) /= z;
    }
    return p;
}

double loss_value(const Tensor& preds, const Batch& batch, LossKind kind) {
    check_preds(preds, batch, kind);
    const std::size_t b = preds.shape[0], c = preds.shape[1];
    double total = 0.0;
    if (kind == LossKind::Mse) {
        for (std::size_t i = 0; i < preds.size(); ++i) {
            const double r = preds.data[i] - batch.targets.data[i];
            total += 0.5 * r * r;
        }
    } else {
        for (std::size_t k = 0; k < b; ++k) {
            double m = preds.at2(k, 0);
            for (std::size_t j = 1; j < c; ++j) m = std::max(m, preds.at2(k, j));
            double z = 0.0;
            for (std::size_t j = 0; j < c; ++j) z += std::exp(preds.at2(k, j) - m);
            total += std::log(z) + m - preds.at2(k, (std::size_t)batch.labels[k]);
        }
    }
    return total / (double)b;
}

Tensor loss_grad_preds(const Tensor& preds, const Batch& batch, LossKind kind) {
    check_preds(preds, batch, kind);
    const std::size_t b = preds.shape[0], c = preds.shape[1];
    const double inv_b = 1.0 / (double)b;
    if (kind == LossKind::Mse) {
        Tensor g = sub(preds, batch.targets);
        for (double& x : g.data) x *= inv_b;
        return g;
    }
    Tensor g = softmax_rows(preds);
    for (std::size_t k = 0; k < b; ++k) g.at2(k, (std::size_t)batch.labels[k]) -= 1.0;
    for (double& x : g.data) x *= inv_b;
    (void)c;
    return g;
}

Tensor loss_hessian_apply(const Tensor& preds, const Batch& batch, LossKind kind,
                          const Tensor& v) {
    check_preds(preds, batch, kind);
    if (!v.same_shape(preds))
        throw std::invalid_argument("loss_hessian_apply: v shape " + shape_str(v.shape) +
                                    " does not match predictions " + shape_str(preds.shape));
    const std::size_t b = preds.shape[0], c = preds.shape[1];
    const double inv_b = 1.0 / (double)b;
    if (kind == LossKind::Mse) return scale(v, inv_b);
    const Tensor p = softmax_rows(preds);
    Tensor out = Tensor::zeros(preds.shape);
    for (std::size_t k = 0; k < b; ++k) {
        double pv = 0.0;
        for (std::size_t j = 0; j < c; ++j) pv += p.at2(k, j) * v.at2(k, j);
        for (std::size_t j = 0; j < c; ++j)
            out.at2(k, j) = (p.at2(k, j) * v.at2(k, j) - p.at2(k, j) * pv) * inv_b;
    }
    return out;
}

}  // namespace adler
