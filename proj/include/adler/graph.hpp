#pragma once

#include <string>
#include <vector>

#include "adler/losses.hpp"
#include "adler/param_set.hpp"
#include "adler/tensor.hpp"

namespace adler {

enum class OpKind { Input, Param, MatMul, AddBias, Activation, Conv2d, AddTensors, Flatten };

struct Node {
    OpKind kind;
    int a = -1;  // first input node
    int b = -1;  // second input node (MatMul rhs, bias, residual branch, conv kernel)
    Elementwise act = Elementwise::Relu;  // Activation only (Relu/Sigmoid/Tanh)
    Padding pad = Padding::Same;          // Conv2d only
    std::string name;                     // Param leaf: ParamSet key
};

/// Static computation graph for one model and batch shape. Nodes are stored
/// in topological order; re-executed with fresh leaf values on every call.
struct Graph {
    std::vector<Node> nodes;
    int input_node = -1;
    int output = -1;

    int add_node(Node n);
    std::vector<std::string> param_names() const;
};

/// Forward pass: predictions F(params) for the batch, shape [b x c].
Tensor evaluate(const Graph& graph, const ParamSet& params, const Tensor& input);

/// Reverse pass: (loss value, gradient with the structure of `params`).
std::pair<double, ParamSet> gradient(const Graph& graph, const ParamSet& params,
                                     const Batch& batch, LossKind loss);

struct JvpResult {
    Tensor output;   // F(params)
    Tensor tangent;  // J_F(params) . direction
};

/// Forward-mode directional derivative of F in a parameter direction.
JvpResult jvp_full(const Graph& graph, const ParamSet& params, const Tensor& input,
                   const ParamSet& direction);
Tensor jvp(const Graph& graph, const ParamSet& params, const Tensor& input,
           const ParamSet& direction);

/// Exact Hessian-vector product of the scalar objective via a dualized
/// reverse pass (forward-over-reverse).
ParamSet hvp(const Graph& graph, const ParamSet& params, const Batch& batch, LossKind loss,
             const ParamSet& direction);

/// Reverse pass through F alone: J_F(params)^T . cotangent, for a cotangent
/// living in prediction space.
ParamSet vjp(const Graph& graph, const ParamSet& params, const Tensor& input,
             const Tensor& cotangent);

}  // namespace adler
