#pragma once

#include <optional>
#include <string>
#include <vector>

#include "adler/graph.hpp"
#include "adler/losses.hpp"
#include "adler/param_set.hpp"

namespace adler {

enum class LrMode { LogMean, LinearMean };

/// Discounted running mean of learning-rate estimates. In LogMean mode the
/// state accumulates log eta and the effective rate is exp(s/c); LinearMean
/// accumulates eta directly (Gauss-Newton variants).
struct LrAggregatorState {
    double s = 0.0;
    double c = 0.0;
    double beta = 0.99;
    LrMode mode = LrMode::LogMean;

    bool started() const { return c > 0.0; }
    double eta_hat() const;
};

/// One aggregator update; returns the new state and effective rate.
std::pair<LrAggregatorState, double> aggregator_update(const LrAggregatorState& state, double eta);

struct CurvatureEstimate {
    double g_dot_g = 0.0;
    double v_q_v = 0.0;
    double eta = 0.0;
    bool degenerate = false;  // zero gradient, no estimate produced
};

/// eta = (G.G) / (v.Qv + eps * G.G), the minimizer of the local quadratic
/// model with the PSD curvature form.
CurvatureEstimate adler_eta(const ParamSet& grad, const Tensor& v, const Tensor& q_apply_result,
                            double epsilon);
CurvatureEstimate curvature_eta(double g_dot_g, double curvature, double epsilon);

enum class Method { Adler, GnExact, GnOuter, Sgd };

Method method_from_string(const std::string& s);
std::string method_to_string(Method m);

struct OptimizerConfig {
    Method method = Method::Adler;
    double beta = 0.99;
    double epsilon = 1e-10;
    std::optional<double> fixed_lr;  // sgd only

    LrMode lr_mode() const { return method == Method::Adler ? LrMode::LogMean : LrMode::LinearMean; }
};

struct StepRecord {
    long k = 0;
    double loss = 0.0;
    double g_dot_g = 0.0;
    double v_q_v = 0.0;  // curvature quadratic form (v.Qv for ADLER, G.HG for GN)
    double eta = 0.0;
    double eta_hat = 0.0;
    double wall_ms = 0.0;
    bool degenerate = false;
};

struct StepResult {
    ParamSet params;
    LrAggregatorState state;
    StepRecord record;
};

StepResult adler_step(const ParamSet& params, const Graph& graph, const Batch& batch,
                      LossKind loss, const LrAggregatorState& state,
                      const OptimizerConfig& config);

StepResult gn_step(const ParamSet& params, const Graph& graph, const Batch& batch, LossKind loss,
                   const LrAggregatorState& state, const OptimizerConfig& config);

StepResult sgd_step(const ParamSet& params, const Graph& graph, const Batch& batch, LossKind loss,
                    double fixed_lr);

/// Dispatch on config.method; SGD requires fixed_lr.
StepResult optimizer_step(const ParamSet& params, const Graph& graph, const Batch& batch,
                          LossKind loss, const LrAggregatorState& state,
                          const OptimizerConfig& config);

/// Ten log-spaced SGD rates from 1e-5 to 3e-1, endpoints exact.
std::vector<double> default_lr_grid();
std::vector<double> log_spaced_grid(double lo, double hi, std::size_t n);

}  // namespace adler
