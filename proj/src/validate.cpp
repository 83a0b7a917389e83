#include "adler/validate.hpp"

#include <cmath>
#include <sstream>

#include "adler/graph.hpp"
#include "adler/models.hpp"
#include "adler/oracles.hpp"
#include "adler/optimizers.hpp"

namespace adler {

namespace {

double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
}

double max_rel_err(const ParamSet& a, const ParamSet& b) {
    std::vector<double> fa = a.flatten(), fb = b.flatten();
    double worst = 0.0;
    for (std::size_t i = 0; i < fa.size(); ++i) worst = std::max(worst, rel_err(fa[i], fb[i]));
    return worst;
}

struct Problem {
    ModelSpec spec;
    ParamSet params;
    Batch batch;
    LossKind loss;
    Graph graph;
};

Problem random_problem(Rng& rng, Elementwise act, LossKind loss) {
    const std::size_t in_dim = 2 + rng.next_u64() % 3;
    const int hidden = 3 + (int)(rng.next_u64() % 4);
    const int c = 2 + (int)(rng.next_u64() % 3);
    Problem p;
    p.spec = make_mlp(in_dim, {hidden}, c, act);
    Rng init(rng.next_u64());
    p.params = init_params(p.spec, init);
    const std::size_t b = 2 + rng.next_u64() % 3;
    p.batch.inputs = rng.normal({b, in_dim}, 0.0, 1.0);
    p.loss = loss;
    if (loss == LossKind::SoftmaxCrossEntropy) {
        for (std::size_t k = 0; k < b; ++k) p.batch.labels.push_back((int)(rng.next_u64() % c));
    } else {
        p.batch.targets = rng.normal({b, (std::size_t)c}, 0.0, 1.0);
    }
    p.graph = build_graph(p.spec, b);
    return p;
}

ParamSet random_direction(const ParamSet& like, Rng& rng) {
    ParamSet d = like.zeros_like();
    for (auto& [name, t] : d.items)
        for (double& x : t.data) x = rng.next_normal();
    return d;
}

using Check = CheckResult (*)(bool);

CheckResult check_gradient_fd(bool quick) {
    Rng rng(101);
    const int trials = quick ? 6 : 30;
    double worst = 0.0;
    const Elementwise acts[] = {Elementwise::Relu, Elementwise::Sigmoid, Elementwise::Tanh};
    for (int t = 0; t < trials; ++t) {
        Problem p = random_problem(rng, acts[t % 3],
                                   t % 2 ? LossKind::Mse : LossKind::SoftmaxCrossEntropy);
        ParamSet g = gradient(p.graph, p.params, p.batch, p.loss).second;
        ParamSet fd = oracles::fd_gradient(p.graph, p.params, p.batch, p.loss);
        worst = std::max(worst, max_rel_err(g, fd));
    }
    std::ostringstream os;
    os << "max rel err " << worst << " over " << trials << " models (tol 1e-5)";
    return {"gradient-vs-finite-differences", worst <= 1e-5, os.str()};
}

CheckResult check_jvp_hvp_fd(bool quick) {
    Rng rng(202);
    const int trials = quick ? 6 : 20;
    double worst = 0.0;
    const Elementwise acts[] = {Elementwise::Sigmoid, Elementwise::Tanh, Elementwise::Relu};
    for (int t = 0; t < trials; ++t) {
        Problem p = random_problem(rng, acts[t % 3], LossKind::SoftmaxCrossEntropy);
        ParamSet d = random_direction(p.params, rng);
        Tensor jv = jvp(p.graph, p.params, p.batch.inputs, d);
        Tensor jv_fd = oracles::fd_jvp(p.graph, p.params, p.batch.inputs, d);
        for (std::size_t i = 0; i < jv.size(); ++i)
            worst = std::max(worst, rel_err(jv.data[i], jv_fd.data[i]));
        ParamSet hv = hvp(p.graph, p.params, p.batch, p.loss, d);
        ParamSet hv_fd = oracles::fd_hvp(p.graph, p.params, p.batch, p.loss, d);
        worst = std::max(worst, max_rel_err(hv, hv_fd));
    }
    std::ostringstream os;
    os << "max rel err " << worst << " over " << trials << " models (tol 1e-5)";
    return {"jvp-hvp-vs-finite-differences", worst <= 1e-5, os.str()};
}

CheckResult check_transpose_consistency(bool quick) {
    Rng rng(303);
    const int trials = quick ? 5 : 25;
    double worst = 0.0;
    for (int t = 0; t < trials; ++t) {
        Problem p = random_problem(rng, Elementwise::Tanh, LossKind::Mse);
        ParamSet d = random_direction(p.params, rng);
        Tensor preds = evaluate(p.graph, p.params, p.batch.inputs);
        Tensor g = rng.normal(preds.shape, 0.0, 1.0);
        const double lhs = dot(jvp(p.graph, p.params, p.batch.inputs, d), g);
        const double rhs = d.dot(vjp(p.graph, p.params, p.batch.inputs, g));
        worst = std::max(worst, rel_err(lhs, rhs));
    }
    std::ostringstream os;
    os << "max rel err " << worst << " (tol 1e-10)";
    return {"jvp-vjp-transpose-consistency", worst <= 1e-10, os.str()};
}

CheckResult check_q_form_equivalence(bool quick) {
    Rng rng(404);
    const int trials = quick ? 5 : 40;
    double worst = 0.0;
    for (int t = 0; t < trials; ++t) {
        Problem p = random_problem(rng, Elementwise::Tanh,
                                   t % 2 ? LossKind::Mse : LossKind::SoftmaxCrossEntropy);
        ParamSet d = random_direction(p.params, rng);
        JvpResult jr = jvp_full(p.graph, p.params, p.batch.inputs, d);
        const double fast = dot(jr.tangent, loss_hessian_apply(jr.output, p.batch, p.loss, jr.tangent));
        const double dense = oracles::dense_q_form(p.graph, p.params, p.batch, p.loss, d);
        worst = std::max(worst, rel_err(fast, dense));
    }
    std::ostringstream os;
    os << "max rel err " << worst << " (tol 1e-10)";
    return {"q-form-fast-vs-dense", worst <= 1e-10, os.str()};
}

CheckResult check_psd(bool quick) {
    Rng rng(505);
    const int trials = quick ? 100 : 1000;
    double worst = 0.0;
    for (int t = 0; t < trials; ++t) {
        const std::size_t b = 1 + rng.next_u64() % 4;
        const std::size_t c = 2 + rng.next_u64() % 5;
        Tensor preds = rng.normal({b, c}, 0.0, 2.0);
        Tensor v = rng.normal({b, c}, 0.0, 1.0);
        Batch batch;
        batch.inputs = Tensor::zeros({b, 1});
        for (std::size_t k = 0; k < b; ++k) batch.labels.push_back((int)(rng.next_u64() % c));
        batch.targets = rng.normal({b, c}, 0.0, 1.0);
        for (LossKind loss : {LossKind::Mse, LossKind::SoftmaxCrossEntropy}) {
            const double q = dot(v, loss_hessian_apply(preds, batch, loss, v));
            worst = std::min(worst, q);
        }
    }
    std::ostringstream os;
    os << "min v.Qv " << worst << " over " << trials << " pairs per loss (tol -1e-12)";
    return {"loss-hessian-psd", worst >= -1e-12, os.str()};
}

CheckResult check_decomposition(bool quick) {
    Rng rng(606);
    const int trials = quick ? 5 : 30;
    double worst = 0.0;
    for (int t = 0; t < trials; ++t) {
        Problem p = random_problem(rng, Elementwise::Tanh, LossKind::SoftmaxCrossEntropy);
        ParamSet d = random_direction(p.params, rng);
        auto rep = oracles::decompose_hessian(p.graph, p.params, p.batch, p.loss, d);
        const double resid = std::abs(rep.closure_residual()) / (1.0 + std::abs(rep.full));
        worst = std::max(worst, resid);
    }
    std::ostringstream os;
    os << "max normalized residual " << worst << " (tol 1e-6)";
    return {"hessian-decomposition-closure", worst <= 1e-6, os.str()};
}

CheckResult check_quadratic_exactness(bool quick) {
    Rng rng(707);
    const int trials = quick ? 10 : 100;
    double worst = 0.0;
    for (int t = 0; t < trials; ++t) {
        // Linear model + MSE: the curvature form is exact, so the adaptive
        // rate must match the dense line-search optimum.
        const std::size_t p_dim = 2 + rng.next_u64() % 6;
        const std::size_t b = p_dim + 4;
        ModelSpec spec;
        spec.input_shape = {p_dim};
        spec.output_dim = 1;
        spec.layers = {LayerSpec::dense(1)};
        Rng init(rng.next_u64());
        ParamSet params = init_params(spec, init);
        Graph graph = build_graph(spec, b);
        Batch batch;
        batch.inputs = rng.normal({b, p_dim}, 0.0, 1.0);
        batch.targets = rng.normal({b, 1}, 0.0, 1.0);
        auto [h, grad] = gradient(graph, params, batch, LossKind::Mse);
        JvpResult jr = jvp_full(graph, params, batch.inputs, grad);
        Tensor qv = loss_hessian_apply(jr.output, batch, LossKind::Mse, jr.tangent);
        CurvatureEstimate est = adler_eta(grad, jr.tangent, qv, 1e-10);
        // Dense reference: eta* = g.g / g.(J^T J / b)g
        Tensor jac = oracles::dense_jacobian(graph, params, batch.inputs);
        std::vector<double> gv = grad.flatten();
        Tensor gcol({gv.size(), 1}, gv);
        Tensor jg = matmul(jac, gcol);
        const double denom = dot(jg, jg) / (double)b;
        const double expected = grad.squared_norm() / denom;
        worst = std::max(worst, rel_err(est.eta, expected));
    }
    std::ostringstream os;
    os << "max rel err " << worst << " over " << trials << " quadratics (tol 1e-6)";
    return {"adaptive-rate-quadratic-exactness", worst <= 1e-6, os.str()};
}

CheckResult check_ewma_closed_form(bool quick) {
    Rng rng(808);
    const int streams = quick ? 50 : 1000;
    double worst = 0.0;
    for (int s = 0; s < streams; ++s) {
        const double beta = (s % 3 == 0) ? 0.5 : (s % 3 == 1 ? 0.9 : 0.99);
        LrAggregatorState state;
        state.beta = beta;
        const int len = 1 + (int)(rng.next_u64() % 40);
        std::vector<double> etas;
        double eta_hat = 0.0;
        for (int i = 0; i < len; ++i) {
            const double eta = std::exp(4.0 * rng.next_normal());
            etas.push_back(eta);
            auto [next, hat] = aggregator_update(state, eta);
            state = next;
            eta_hat = hat;
        }
        double num = 0.0, den = 0.0;
        for (int i = 0; i < len; ++i) {
            const double w = std::pow(beta, (double)(len - 1 - i));
            num += w * std::log(etas[(std::size_t)i]);
            den += w;
        }
        worst = std::max(worst, rel_err(eta_hat, std::exp(num / den)));
    }
    std::ostringstream os;
    os << "max rel err " << worst << " over " << streams << " streams (tol 1e-12)";
    return {"ewma-recurrence-vs-closed-form", worst <= 1e-12, os.str()};
}

}  // namespace

std::vector<CheckResult> run_validation(bool quick) {
    const Check checks[] = {
        check_gradient_fd,      check_jvp_hvp_fd,          check_transpose_consistency,
        check_q_form_equivalence, check_psd,               check_decomposition,
        check_quadratic_exactness, check_ewma_closed_form,
    };
    std::vector<CheckResult> results;
    for (Check c : checks) results.push_back(c(quick));
    return results;
}

}  // namespace adler
