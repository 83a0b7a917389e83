#include "adler/oracles.hpp"

#include <cmath>
#include <stdexcept>

namespace adler {
namespace oracles {

namespace {

constexpr std::size_t kDenseGuard = 10000;

void check_desk_scale(const ParamSet& params) {
    if (params.total_size() > kDenseGuard)
        throw std::invalid_argument("dense oracle guard: " + std::to_string(params.total_size()) +
                                    " parameters exceeds " + std::to_string(kDenseGuard));
}

ParamSet shifted(const ParamSet& params, const ParamSet& d, double step) {
    ParamSet p = params;
    p.axpy(step, d);
    return p;
}

}  // namespace

ParamSet fd_gradient(const Graph& graph, const ParamSet& params, const Batch& batch,
                     LossKind loss, double h) {
    if (h <= 0.0) throw std::invalid_argument("fd_gradient: step must be positive");
    std::vector<double> flat = params.flatten();
    std::vector<double> grad(flat.size(), 0.0);
    for (std::size_t j = 0; j < flat.size(); ++j) {
        const double saved = flat[j];
        flat[j] = saved + h;
        const double hp = loss_value(evaluate(graph, params.unflatten(flat), batch.inputs), batch, loss);
        flat[j] = saved - h;
        const double hm = loss_value(evaluate(graph, params.unflatten(flat), batch.inputs), batch, loss);
        flat[j] = saved;
        grad[j] = (hp - hm) / (2.0 * h);
    }
    return params.unflatten(grad);
}

ParamSet fd_hvp(const Graph& graph, const ParamSet& params, const Batch& batch, LossKind loss,
                const ParamSet& d, double h) {
    if (h <= 0.0) throw std::invalid_argument("fd_hvp: step must be positive");
    auto gp = gradient(graph, shifted(params, d, h), batch, loss).second;
    auto gm = gradient(graph, shifted(params, d, -h), batch, loss).second;
    gp.axpy(-1.0, gm);
    gp.scale_inplace(1.0 / (2.0 * h));
    return gp;
}

Tensor fd_jvp(const Graph& graph, const ParamSet& params, const Tensor& input, const ParamSet& d,
              double h) {
    Tensor fp = evaluate(graph, shifted(params, d, h), input);
    Tensor fm = evaluate(graph, shifted(params, d, -h), input);
    return scale(sub(fp, fm), 1.0 / (2.0 * h));
}

Tensor dense_jacobian(const Graph& graph, const ParamSet& params, const Tensor& input) {
    check_desk_scale(params);
    const std::size_t p = params.total_size();
    Tensor probe = evaluate(graph, params, input);
    const std::size_t rows = probe.size();
    Tensor jac = Tensor::zeros({rows, p});
    std::vector<double> e(p, 0.0);
    for (std::size_t j = 0; j < p; ++j) {
        e[j] = 1.0;
        Tensor col = jvp(graph, params, input, params.unflatten(e));
        e[j] = 0.0;
        for (std::size_t r = 0; r < rows; ++r) jac.at2(r, j) = col.data[r];
    }
    return jac;
}

Tensor dense_loss_hessian(const Tensor& preds, const Batch& batch, LossKind kind) {
    const std::size_t n = preds.size();
    Tensor hess = Tensor::zeros({n, n});
    Tensor e = Tensor::zeros(preds.shape);
    for (std::size_t j = 0; j < n; ++j) {
        e.data[j] = 1.0;
        Tensor col = loss_hessian_apply(preds, batch, kind, e);
        e.data[j] = 0.0;
        for (std::size_t r = 0; r < n; ++r) hess.at2(r, j) = col.data[r];
    }
    return hess;
}

double dense_q_form(const Graph& graph, const ParamSet& params, const Batch& batch, LossKind loss,
                    const ParamSet& d) {
    check_desk_scale(params);
    Tensor jac = dense_jacobian(graph, params, batch.inputs);
    Tensor preds = evaluate(graph, params, batch.inputs);
    Tensor hess = dense_loss_hessian(preds, batch, loss);
    std::vector<double> dv = d.flatten();
    Tensor dmat({dv.size(), 1}, dv);
    Tensor jd = matmul(jac, dmat);           // (b*c) x 1
    Tensor hjd = matmul(hess, jd);           // (b*c) x 1
    return dot(jd, hjd);
}

DecompositionReport decompose_hessian(const Graph& graph, const ParamSet& params,
                                      const Batch& batch, LossKind loss, const ParamSet& d) {
    DecompositionReport rep;
    // Fast PSD term: <Jd, (grad^2 L) Jd>.
    JvpResult jr = jvp_full(graph, params, batch.inputs, d);
    Tensor qv = loss_hessian_apply(jr.output, batch, loss, jr.tangent);
    rep.q_term = dot(jr.tangent, qv);
    // Full quadratic form via exact hvp.
    rep.full = d.dot(hvp(graph, params, batch, loss, d));
    // Dropped term measured on its own: second directional derivative of F
    // along d, contracted with the loss gradient.
    const double h = 1e-5;
    Tensor jp = jvp(graph, shifted(params, d, h), batch.inputs, d);
    Tensor jm = jvp(graph, shifted(params, d, -h), batch.inputs, d);
    Tensor d2f = scale(sub(jp, jm), 1.0 / (2.0 * h));
    Tensor gl = loss_grad_preds(jr.output, batch, loss);
    rep.dropped_term = dot(gl, d2f);
    rep.ratio = std::abs(rep.dropped_term) / std::max(std::abs(rep.q_term), 1e-300);
    return rep;
}

}  // namespace oracles
}  // namespace adler
