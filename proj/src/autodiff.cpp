#include "adler/graph.hpp"

#include <cmath>
#include <stdexcept>

namespace adler {

int Graph::add_node(Node n) {
    const int id = (int)nodes.size();
    if (n.a >= id || n.b >= id)
        throw std::invalid_argument("graph: node inputs must precede the node");
    nodes.push_back(std::move(n));
    return id;
}

std::vector<std::string> Graph::param_names() const {
    std::vector<std::string> names;
    for (const auto& n : nodes)
        if (n.kind == OpKind::Param) names.push_back(n.name);
    return names;
}

namespace {

Tensor reshape(const Tensor& t, std::vector<std::size_t> shape) {
    if (shape_numel(shape) != t.size())
        throw std::invalid_argument("reshape: " + shape_str(t.shape) + " -> " + shape_str(shape));
    Tensor out = t;
    out.shape = std::move(shape);
    return out;
}

std::vector<std::size_t> flatten_shape(const std::vector<std::size_t>& s) {
    if (s.empty()) throw std::invalid_argument("flatten: rank-0 input");
    return {s[0], shape_numel(s) / s[0]};
}

Tensor bias_add(const Tensor& x, const Tensor& bias) {
    Tensor out = x;
    if (x.rank() == 2) {
        if (bias.rank() != 1 || bias.shape[0] != x.shape[1])
            throw std::invalid_argument("bias " + shape_str(bias.shape) + " does not match " +
                                        shape_str(x.shape));
        for (std::size_t r = 0; r < x.shape[0]; ++r)
            for (std::size_t j = 0; j < x.shape[1]; ++j) out.at2(r, j) += bias[j];
        return out;
    }
    if (x.rank() == 4) {
        if (bias.rank() != 1 || bias.shape[0] != x.shape[1])
            throw std::invalid_argument("channel bias " + shape_str(bias.shape) +
                                        " does not match " + shape_str(x.shape));
        for (std::size_t b = 0; b < x.shape[0]; ++b)
            for (std::size_t c = 0; c < x.shape[1]; ++c)
                for (std::size_t h = 0; h < x.shape[2]; ++h)
                    for (std::size_t w = 0; w < x.shape[3]; ++w) out.at4(b, c, h, w) += bias[c];
        return out;
    }
    throw std::invalid_argument("bias add: unsupported rank " + shape_str(x.shape));
}

void bias_reduce_acc(const Tensor& g, Tensor& bias_grad) {
    if (g.rank() == 2) {
        for (std::size_t r = 0; r < g.shape[0]; ++r)
            for (std::size_t j = 0; j < g.shape[1]; ++j) bias_grad[j] += g.at2(r, j);
        return;
    }
    for (std::size_t b = 0; b < g.shape[0]; ++b)
        for (std::size_t c = 0; c < g.shape[1]; ++c)
            for (std::size_t h = 0; h < g.shape[2]; ++h)
                for (std::size_t w = 0; w < g.shape[3]; ++w) bias_grad[c] += g.at4(b, c, h, w);
}

// First and second derivatives of the supported activations.
void act_derivs(Elementwise kind, const Tensor& x, Tensor& d1, Tensor* d2) {
    d1 = Tensor::zeros(x.shape);
    if (d2) *d2 = Tensor::zeros(x.shape);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double v = x.data[i];
        switch (kind) {
            case Elementwise::Relu:
                d1.data[i] = v > 0.0 ? 1.0 : 0.0;  // derivative at 0 fixed to 0
                break;
            case Elementwise::Sigmoid: {
                const double s = 1.0 / (1.0 + std::exp(-v));
                d1.data[i] = s * (1.0 - s);
                if (d2) d2->data[i] = s * (1.0 - s) * (1.0 - 2.0 * s);
                break;
            }
            case Elementwise::Tanh: {
                const double t = std::tanh(v);
                d1.data[i] = 1.0 - t * t;
                if (d2) d2->data[i] = -2.0 * t * (1.0 - t * t);
                break;
            }
            default:
                throw std::invalid_argument("graph activation must be relu/sigmoid/tanh");
        }
    }
}

struct Trace {
    std::vector<Tensor> val;
    std::vector<Tensor> dot;  // forward tangents; empty vector when not tracked
    bool with_tangent = false;
};

Trace forward(const Graph& graph, const ParamSet& params, const Tensor& input,
              const ParamSet* direction) {
    Trace tr;
    tr.with_tangent = direction != nullptr;
    tr.val.resize(graph.nodes.size());
    if (tr.with_tangent) tr.dot.resize(graph.nodes.size());
    for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
        const Node& n = graph.nodes[i];
        Tensor v, d;
        switch (n.kind) {
            case OpKind::Input:
                v = input;
                if (tr.with_tangent) d = Tensor::zeros(input.shape);
                break;
            case OpKind::Param:
                if (!params.contains(n.name))
                    throw std::invalid_argument("graph: unbound parameter leaf '" + n.name + "'");
                v = params.at(n.name);
                if (tr.with_tangent) d = direction->at(n.name);
                break;
            case OpKind::MatMul:
                v = matmul(tr.val[n.a], tr.val[n.b]);
                if (tr.with_tangent)
                    d = add(matmul(tr.dot[n.a], tr.val[n.b]), matmul(tr.val[n.a], tr.dot[n.b]));
                break;
            case OpKind::AddBias:
                v = bias_add(tr.val[n.a], tr.val[n.b]);
                if (tr.with_tangent) d = bias_add(tr.dot[n.a], tr.dot[n.b]);
                break;
            case OpKind::Activation: {
                v = elementwise(n.act, tr.val[n.a]);
                if (tr.with_tangent) {
                    Tensor d1;
                    act_derivs(n.act, tr.val[n.a], d1, nullptr);
                    d = mul(d1, tr.dot[n.a]);
                }
                break;
            }
            case OpKind::Conv2d:
                v = conv2d(tr.val[n.a], tr.val[n.b], n.pad);
                if (tr.with_tangent) {
                    d = Tensor::zeros(v.shape);
                    conv2d_acc(tr.dot[n.a], tr.val[n.b], n.pad, d);
                    conv2d_acc(tr.val[n.a], tr.dot[n.b], n.pad, d);
                }
                break;
            case OpKind::AddTensors:
                v = add(tr.val[n.a], tr.val[n.b]);
                if (tr.with_tangent) d = add(tr.dot[n.a], tr.dot[n.b]);
                break;
            case OpKind::Flatten:
                v = reshape(tr.val[n.a], flatten_shape(tr.val[n.a].shape));
                if (tr.with_tangent) d = reshape(tr.dot[n.a], v.shape);
                break;
        }
        tr.val[i] = std::move(v);
        if (tr.with_tangent) tr.dot[i] = std::move(d);
    }
    return tr;
}

struct BackwardResult {
    ParamSet grad;
    ParamSet grad_dot;  // tangent of the gradient (only in dual mode)
};

// Reverse pass; when `seed_dot` is provided the whole pass runs on dual
// numbers and grad_dot carries d/deps of the gradient along the forward
// tangent stored in the trace.
BackwardResult backward(const Graph& graph, const Trace& tr, const ParamSet& params,
                        const Tensor& seed, const Tensor* seed_dot) {
    const bool dual = seed_dot != nullptr;
    std::vector<Tensor> adj(graph.nodes.size());
    std::vector<Tensor> adj_dot;
    std::vector<bool> live(graph.nodes.size(), false);
    if (dual) adj_dot.resize(graph.nodes.size());

    auto acc = [&](int id, const Tensor& g, const Tensor* gd) {
        if (!live[id]) {
            adj[id] = Tensor::zeros(tr.val[id].shape);
            if (dual) adj_dot[id] = Tensor::zeros(tr.val[id].shape);
            live[id] = true;
        }
        for (std::size_t i = 0; i < g.size(); ++i) adj[id].data[i] += g.data[i];
        if (dual)
            for (std::size_t i = 0; i < gd->size(); ++i) adj_dot[id].data[i] += gd->data[i];
    };

    acc(graph.output, seed, seed_dot);

    BackwardResult res;
    res.grad = params.zeros_like();
    if (dual) res.grad_dot = params.zeros_like();

    for (int i = (int)graph.nodes.size() - 1; i >= 0; --i) {
        if (!live[i]) continue;
        const Node& n = graph.nodes[i];
        const Tensor& g = adj[i];
        const Tensor* gd = dual ? &adj_dot[i] : nullptr;
        switch (n.kind) {
            case OpKind::Input:
                break;
            case OpKind::Param:
                res.grad.at(n.name) = add(res.grad.at(n.name), g);
                if (dual) res.grad_dot.at(n.name) = add(res.grad_dot.at(n.name), *gd);
                break;
            case OpKind::MatMul: {
                const Tensor& A = tr.val[n.a];
                const Tensor& B = tr.val[n.b];
                Tensor ga = matmul(g, B, false, true);
                Tensor gb = matmul(A, g, true, false);
                if (dual) {
                    Tensor ga_dot = add(matmul(*gd, B, false, true),
                                        matmul(g, tr.dot[n.b], false, true));
                    Tensor gb_dot = add(matmul(tr.dot[n.a], g, true, false),
                                        matmul(A, *gd, true, false));
                    acc(n.a, ga, &ga_dot);
                    acc(n.b, gb, &gb_dot);
                } else {
                    acc(n.a, ga, nullptr);
                    acc(n.b, gb, nullptr);
                }
                break;
            }
            case OpKind::AddBias: {
                Tensor gb = Tensor::zeros(tr.val[n.b].shape);
                bias_reduce_acc(g, gb);
                if (dual) {
                    Tensor gb_dot = Tensor::zeros(tr.val[n.b].shape);
                    bias_reduce_acc(*gd, gb_dot);
                    acc(n.a, g, gd);
                    acc(n.b, gb, &gb_dot);
                } else {
                    acc(n.a, g, nullptr);
                    acc(n.b, gb, nullptr);
                }
                break;
            }
            case OpKind::Activation: {
                Tensor d1, d2;
                act_derivs(n.act, tr.val[n.a], d1, dual ? &d2 : nullptr);
                Tensor ga = mul(d1, g);
                if (dual) {
                    // d/deps (f'(x) g) = f''(x) x_dot g + f'(x) g_dot
                    Tensor ga_dot = add(mul(mul(d2, tr.dot[n.a]), g), mul(d1, *gd));
                    acc(n.a, ga, &ga_dot);
                } else {
                    acc(n.a, ga, nullptr);
                }
                break;
            }
            case OpKind::Conv2d: {
                const Tensor& x = tr.val[n.a];
                const Tensor& k = tr.val[n.b];
                Tensor gx = Tensor::zeros(x.shape);
                Tensor gk = Tensor::zeros(k.shape);
                conv2d_input_grad_acc(g, k, n.pad, gx);
                conv2d_kernel_grad_acc(x, g, n.pad, gk);
                if (dual) {
                    Tensor gx_dot = Tensor::zeros(x.shape);
                    Tensor gk_dot = Tensor::zeros(k.shape);
                    conv2d_input_grad_acc(*gd, k, n.pad, gx_dot);
                    conv2d_input_grad_acc(g, tr.dot[n.b], n.pad, gx_dot);
                    conv2d_kernel_grad_acc(tr.dot[n.a], g, n.pad, gk_dot);
                    conv2d_kernel_grad_acc(x, *gd, n.pad, gk_dot);
                    acc(n.a, gx, &gx_dot);
                    acc(n.b, gk, &gk_dot);
                } else {
                    acc(n.a, gx, nullptr);
                    acc(n.b, gk, nullptr);
                }
                break;
            }
            case OpKind::AddTensors:
                acc(n.a, g, gd);
                acc(n.b, g, gd);
                break;
            case OpKind::Flatten: {
                Tensor ga = reshape(g, tr.val[n.a].shape);
                if (dual) {
                    Tensor ga_dot = reshape(*gd, tr.val[n.a].shape);
                    acc(n.a, ga, &ga_dot);
                } else {
                    acc(n.a, ga, nullptr);
                }
                break;
            }
        }
    }
    return res;
}

}  // namespace

Tensor evaluate(const Graph& graph, const ParamSet& params, const Tensor& input) {
    if (graph.output < 0) throw std::invalid_argument("graph has no output node");
    Trace tr = forward(graph, params, input, nullptr);
    return tr.val[graph.output];
}

std::pair<double, ParamSet> gradient(const Graph& graph, const ParamSet& params,
                                     const Batch& batch, LossKind loss) {
    Trace tr = forward(graph, params, batch.inputs, nullptr);
    const Tensor& preds = tr.val[graph.output];
    const double h = loss_value(preds, batch, loss);
    Tensor seed = loss_grad_preds(preds, batch, loss);
    BackwardResult res = backward(graph, tr, params, seed, nullptr);
    return {h, std::move(res.grad)};
}

JvpResult jvp_full(const Graph& graph, const ParamSet& params, const Tensor& input,
                   const ParamSet& direction) {
    if (!params.same_structure(direction))
        throw std::invalid_argument("jvp: direction structure does not match params");
    Trace tr = forward(graph, params, input, &direction);
    return {tr.val[graph.output], tr.dot[graph.output]};
}

Tensor jvp(const Graph& graph, const ParamSet& params, const Tensor& input,
           const ParamSet& direction) {
    return jvp_full(graph, params, input, direction).tangent;
}

ParamSet hvp(const Graph& graph, const ParamSet& params, const Batch& batch, LossKind loss,
             const ParamSet& direction) {
    if (!params.same_structure(direction))
        throw std::invalid_argument("hvp: direction structure does not match params");
    Trace tr = forward(graph, params, batch.inputs, &direction);
    const Tensor& preds = tr.val[graph.output];
    const Tensor& preds_dot = tr.dot[graph.output];
    Tensor seed = loss_grad_preds(preds, batch, loss);
    // Tangent of the loss gradient: prediction-space Hessian applied to the
    // forward tangent of the predictions.
    Tensor seed_dot = loss_hessian_apply(preds, batch, loss, preds_dot);
    BackwardResult res = backward(graph, tr, params, seed, &seed_dot);
    return std::move(res.grad_dot);
}

ParamSet vjp(const Graph& graph, const ParamSet& params, const Tensor& input,
             const Tensor& cotangent) {
    Trace tr = forward(graph, params, input, nullptr);
    if (!cotangent.same_shape(tr.val[graph.output]))
        throw std::invalid_argument("vjp: cotangent shape " + shape_str(cotangent.shape) +
                                    " does not match output " +
                                    shape_str(tr.val[graph.output].shape));
    BackwardResult res = backward(graph, tr, params, cotangent, nullptr);
    return std::move(res.grad);
}

}  // namespace adler
