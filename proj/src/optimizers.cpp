#include "adler/optimizers.hpp"

#include <cmath>
#include <stdexcept>

namespace adler {

double LrAggregatorState::eta_hat() const {
    if (c <= 0.0) throw std::logic_error("eta_hat: aggregator has no updates yet");
    return mode == LrMode::LogMean ? std::exp(s / c) : s / c;
}

std::pair<LrAggregatorState, double> aggregator_update(const LrAggregatorState& state,
                                                       double eta) {
    if (!std::isfinite(eta)) throw std::invalid_argument("aggregator_update: non-finite eta");
    if (state.mode == LrMode::LogMean && eta <= 0.0)
        throw std::invalid_argument("aggregator_update: eta must be positive in log mode, got " +
                                    std::to_string(eta));
    LrAggregatorState next = state;
    next.s = state.beta * state.s + (state.mode == LrMode::LogMean ? std::log(eta) : eta);
    next.c = state.beta * state.c + 1.0;
    return {next, next.eta_hat()};
}

CurvatureEstimate curvature_eta(double g_dot_g, double curvature, double epsilon) {
    if (epsilon <= 0.0) throw std::invalid_argument("epsilon must be positive");
    CurvatureEstimate est;
    est.g_dot_g = g_dot_g;
    est.v_q_v = curvature;
    if (g_dot_g <= 0.0) {
        est.degenerate = true;
        return est;
    }
    est.eta = g_dot_g / (curvature + epsilon * g_dot_g);
    return est;
}

CurvatureEstimate adler_eta(const ParamSet& grad, const Tensor& v, const Tensor& q_apply_result,
                            double epsilon) {
    return curvature_eta(grad.squared_norm(), dot(v, q_apply_result), epsilon);
}

Method method_from_string(const std::string& s) {
    if (s == "adler") return Method::Adler;
    if (s == "gn_exact") return Method::GnExact;
    if (s == "gn_outer") return Method::GnOuter;
    if (s == "sgd") return Method::Sgd;
    throw std::invalid_argument("unknown optimizer method '" + s + "'");
}

std::string method_to_string(Method m) {
    switch (m) {
        case Method::Adler: return "adler";
        case Method::GnExact: return "gn_exact";
        case Method::GnOuter: return "gn_outer";
        case Method::Sgd: return "sgd";
    }
    return "?";
}

namespace {

StepResult finish_step(const ParamSet& params, const ParamSet& grad, double loss,
                       const LrAggregatorState& state, const CurvatureEstimate& est) {
    StepResult res;
    res.record.loss = loss;
    res.record.g_dot_g = est.g_dot_g;
    res.record.v_q_v = est.v_q_v;
    if (est.degenerate) {
        // Zero gradient: no eta estimate, state untouched, parameters unchanged.
        res.params = params;
        res.state = state;
        res.record.degenerate = true;
        res.record.eta_hat = state.started() ? state.eta_hat() : 0.0;
        return res;
    }
    auto [next_state, eta_hat] = aggregator_update(state, est.eta);
    res.state = next_state;
    res.record.eta = est.eta;
    res.record.eta_hat = eta_hat;
    res.params = params;
    res.params.axpy(-eta_hat, grad);
    return res;
}

}  // namespace

StepResult adler_step(const ParamSet& params, const Graph& graph, const Batch& batch,
                      LossKind loss, const LrAggregatorState& state,
                      const OptimizerConfig& config) {
    auto [h, grad] = gradient(graph, params, batch, loss);
    const double g_dot_g = grad.squared_norm();
    if (g_dot_g <= 0.0)
        return finish_step(params, grad, h, state, curvature_eta(0.0, 0.0, config.epsilon));
    JvpResult jr = jvp_full(graph, params, batch.inputs, grad);
    Tensor qv = loss_hessian_apply(jr.output, batch, loss, jr.tangent);
    CurvatureEstimate est = curvature_eta(g_dot_g, dot(jr.tangent, qv), config.epsilon);
    return finish_step(params, grad, h, state, est);
}

StepResult gn_step(const ParamSet& params, const Graph& graph, const Batch& batch, LossKind loss,
                   const LrAggregatorState& state, const OptimizerConfig& config) {
    auto [h, grad] = gradient(graph, params, batch, loss);
    const double g_dot_g = grad.squared_norm();
    if (g_dot_g <= 0.0)
        return finish_step(params, grad, h, state, curvature_eta(0.0, 0.0, config.epsilon));
    double curvature = 0.0;
    if (config.method == Method::GnExact) {
        // True Hessian quadratic form; may be indefinite, clamp below at 0
        // so the eps floor keeps the denominator positive.
        ParamSet hg = hvp(graph, params, batch, loss, grad);
        curvature = std::max(grad.dot(hg), 0.0);
    } else if (config.method == Method::GnOuter) {
        JvpResult jr = jvp_full(graph, params, batch.inputs, grad);
        Tensor gp = loss_grad_preds(jr.output, batch, loss);
        const double d = dot(gp, jr.tangent);
        curvature = d * d;
    } else {
        throw std::invalid_argument("gn_step: method must be gn_exact or gn_outer");
    }
    return finish_step(params, grad, h, state, curvature_eta(g_dot_g, curvature, config.epsilon));
}

StepResult sgd_step(const ParamSet& params, const Graph& graph, const Batch& batch, LossKind loss,
                    double fixed_lr) {
    if (fixed_lr <= 0.0) throw std::invalid_argument("sgd_step: fixed_lr must be positive");
    auto [h, grad] = gradient(graph, params, batch, loss);
    StepResult res;
    res.params = params;
    res.params.axpy(-fixed_lr, grad);
    res.record.loss = h;
    res.record.g_dot_g = grad.squared_norm();
    res.record.eta = fixed_lr;
    res.record.eta_hat = fixed_lr;
    return res;
}

StepResult optimizer_step(const ParamSet& params, const Graph& graph, const Batch& batch,
                          LossKind loss, const LrAggregatorState& state,
                          const OptimizerConfig& config) {
    switch (config.method) {
        case Method::Adler: return adler_step(params, graph, batch, loss, state, config);
        case Method::GnExact:
        case Method::GnOuter: return gn_step(params, graph, batch, loss, state, config);
        case Method::Sgd:
            if (!config.fixed_lr) throw std::invalid_argument("sgd requires fixed_lr");
            return sgd_step(params, graph, batch, loss, *config.fixed_lr);
    }
    throw std::logic_error("optimizer_step: unreachable");
}

std::vector<double> log_spaced_grid(double lo, double hi, std::size_t n) {
    if (n == 0 || lo <= 0.0 || hi <= 0.0)
        throw std::invalid_argument("log_spaced_grid: need n >= 1 and positive endpoints");
    std::vector<double> grid(n);
    if (n == 1) {
        grid[0] = lo;
        return grid;
    }
    const double llo = std::log(lo), lhi = std::log(hi);
    for (std::size_t i = 0; i < n; ++i)
        grid[i] = std::exp(llo + (lhi - llo) * (double)i / (double)(n - 1));
    grid.front() = lo;  // endpoints exact
    grid.back() = hi;
    return grid;
}

std::vector<double> default_lr_grid() { return log_spaced_grid(1e-5, 3e-1, 10); }

}  // namespace adler
