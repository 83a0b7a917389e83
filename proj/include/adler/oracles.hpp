#pragma once

#include "adler/graph.hpp"
#include "adler/losses.hpp"
#include "adler/param_set.hpp"

namespace adler {
namespace oracles {

/// Central-difference gradient of the scalar objective, one objective
/// evaluation pair per coordinate.
ParamSet fd_gradient(const Graph& graph, const ParamSet& params, const Batch& batch,
                     LossKind loss, double h = 1e-6);

/// Central-difference Hessian-vector product via shifted gradients.
ParamSet fd_hvp(const Graph& graph, const ParamSet& params, const Batch& batch, LossKind loss,
                const ParamSet& d, double h = 1e-5);

/// Central-difference directional derivative of F (prediction space).
Tensor fd_jvp(const Graph& graph, const ParamSet& params, const Tensor& input, const ParamSet& d,
              double h = 1e-6);

/// Dense Jacobian of F, [(b*c) x P], column j = jvp(e_j). Guarded to
/// desk-scale parameter counts.
Tensor dense_jacobian(const Graph& graph, const ParamSet& params, const Tensor& input);

/// Dense block-diagonal prediction-space Hessian of the loss, [(b*c) x (b*c)].
Tensor dense_loss_hessian(const Tensor& preds, const Batch& batch, LossKind kind);

/// d^T J^T (grad^2 L) J d built from explicit dense matrices; the slow
/// counterpart of the jvp + loss_hessian_apply fast path.
double dense_q_form(const Graph& graph, const ParamSet& params, const Batch& batch, LossKind loss,
                    const ParamSet& d);

struct DecompositionReport {
    double q_term = 0.0;        // d.Qd, fast path
    double dropped_term = 0.0;  // d.(gradL . grad^2 F)d, independent FD route
    double full = 0.0;          // d.(grad^2 h)d, exact hvp
    double ratio = 0.0;         // |dropped| / max(|q_term|, tiny)
    double closure_residual() const { return full - q_term - dropped_term; }
};

/// Splits the objective Hessian quadratic form into the PSD curvature term
/// and the term the approximation drops. The dropped term is measured
/// independently as <gradL(F), d^2/de^2 F(theta + e d)> via central
/// differences of the jvp, so the closure check is non-trivial.
DecompositionReport decompose_hessian(const Graph& graph, const ParamSet& params,
                                      const Batch& batch, LossKind loss, const ParamSet& d);

}  // namespace oracles
}  // namespace adler
