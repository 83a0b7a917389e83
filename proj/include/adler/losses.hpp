#pragma once

#include <vector>

#include "adler/tensor.hpp"

namespace adler {

enum class LossKind { Mse, SoftmaxCrossEntropy };

/// A minibatch: inputs plus either class indices (cross-entropy) or a dense
/// target tensor (MSE).
struct Batch {
    Tensor inputs;
    std::vector<int> labels;  // cross-entropy targets, values in [0, c)
    Tensor targets;           // mse targets, [b x c]

    std::size_t size() const { return inputs.shape.empty() ? 0 : inputs.shape[0]; }
};

/// Mean loss over the batch. MSE carries the 1/2 factor so its per-example
/// prediction-space Hessian is exactly I/b.
double loss_value(const Tensor& preds, const Batch& batch, LossKind kind);

/// Gradient of loss_value with respect to predictions, [b x c].
Tensor loss_grad_preds(const Tensor& preds, const Batch& batch, LossKind kind);

/// Applies the block-diagonal prediction-space Hessian to v. Per example:
/// mse v/b; cross-entropy (p*v - p*(p.v))/b with p = softmax(preds).
Tensor loss_hessian_apply(const Tensor& preds, const Batch& batch, LossKind kind, const Tensor& v);

/// Row-wise softmax with log-sum-exp stabilization.
Tensor softmax_rows(const Tensor& logits);

}  // namespace adler
