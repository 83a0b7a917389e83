#include <cmath>
#include <stdexcept>

#include "adler/graph.hpp"
#include "adler/models.hpp"
#include "adler/oracles.hpp"
#include "doctest.h"

using namespace adler;

namespace {

// F(theta) = X theta for a weight matrix named "w": one matmul, no bias.
Graph linear_graph() {
    Graph g;
    Node in;
    in.kind = OpKind::Input;
    g.input_node = g.add_node(in);
    Node w;
    w.kind = OpKind::Param;
    w.name = "w";
    const int wid = g.add_node(w);
    Node mm;
    mm.kind = OpKind::MatMul;
    mm.a = g.input_node;
    mm.b = wid;
    g.output = g.add_node(mm);
    return g;
}

ParamSet single_weight(std::size_t in_dim, std::size_t out_dim, const std::vector<double>& w) {
    ParamSet p;
    p.add("w", Tensor({in_dim, out_dim}, w));
    return p;
}

double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
}

double max_rel_err(const ParamSet& a, const ParamSet& b) {
    auto fa = a.flatten(), fb = b.flatten();
    double worst = 0.0;
    for (std::size_t i = 0; i < fa.size(); ++i) worst = std::max(worst, rel_err(fa[i], fb[i]));
    return worst;
}

ParamSet random_direction(const ParamSet& like, Rng& rng) {
    ParamSet d = like.zeros_like();
    for (auto& [name, t] : d.items)
        for (double& x : t.data) x = rng.next_normal();
    return d;
}

struct MlpProblem {
    ModelSpec spec;
    Graph graph;
    ParamSet params;
    Batch batch;
    LossKind loss;
};

MlpProblem random_mlp(Rng& rng, Elementwise act, LossKind loss, int n_hidden = 1) {
    MlpProblem p;
    std::vector<int> widths((std::size_t)n_hidden, 4);
    p.spec = make_mlp(3, widths, 3, act);
    Rng init(rng.next_u64());
    p.params = init_params(p.spec, init);
    p.batch.inputs = rng.normal({4, 3}, 0.0, 1.0);
    p.loss = loss;
    if (loss == LossKind::SoftmaxCrossEntropy)
        p.batch.labels = {0, 2, 1, 2};
    else
        p.batch.targets = rng.normal({4, 3}, 0.0, 1.0);
    p.graph = build_graph(p.spec, 4);
    return p;
}

}  // namespace

TEST_CASE("evaluate: identity and zero weights") {
    Graph g = linear_graph();
    ParamSet identity = single_weight(2, 2, {1, 0, 0, 1});
    Rng rng(31);
    Tensor x = rng.normal({3, 2}, 0.0, 1.0);
    Tensor y = evaluate(g, identity, x);
    CHECK(y.data == x.data);

    ParamSet zero = single_weight(2, 2, {0, 0, 0, 0});
    Tensor y0 = evaluate(g, zero, x);
    for (double v : y0.data) CHECK(v == 0.0);
}

TEST_CASE("evaluate: tanh MLP matches straight-line forward oracle") {
    Rng rng(32);
    ModelSpec spec = make_mlp(2, {3}, 2, Elementwise::Tanh);
    Rng init(7);
    ParamSet params = init_params(spec, init);
    Graph g = build_graph(spec, 2);
    Tensor x = rng.normal({2, 2}, 0.0, 1.0);
    Tensor got = evaluate(g, params, x);

    // Hand-rolled forward pass.
    const Tensor& w0 = params.at("layer0.w");
    const Tensor& b0 = params.at("layer0.b");
    const Tensor& w2 = params.at("layer2.w");
    const Tensor& b2 = params.at("layer2.b");
    for (std::size_t r = 0; r < 2; ++r) {
        double hid[3];
        for (std::size_t j = 0; j < 3; ++j) {
            double s = b0[j];
            for (std::size_t i = 0; i < 2; ++i) s += x.at2(r, i) * w0.at2(i, j);
            hid[j] = std::tanh(s);
        }
        for (std::size_t j = 0; j < 2; ++j) {
            double s = b2[j];
            for (std::size_t i = 0; i < 3; ++i) s += hid[i] * w2.at2(i, j);
            CHECK(std::abs(got.at2(r, j) - s) < 1e-14);
        }
    }
}

TEST_CASE("evaluate: unbound leaf error") {
    Graph g = linear_graph();
    ParamSet wrong;
    wrong.add("other", Tensor::matrix(2, 2, {1, 0, 0, 1}));
    CHECK_THROWS_WITH_AS(evaluate(g, wrong, Tensor::matrix(1, 2, {1, 1})),
                         doctest::Contains("unbound"), std::invalid_argument);
}

TEST_CASE("gradient: scalar quadratic") {
    // F(theta) = theta via x = 1; MSE against target 0 gives h = theta^2 / 2.
    Graph g = linear_graph();
    ParamSet params = single_weight(1, 1, {2.0});
    Batch batch;
    batch.inputs = Tensor::matrix(1, 1, {1.0});
    batch.targets = Tensor::matrix(1, 1, {0.0});
    auto [h, grad] = gradient(g, params, batch, LossKind::Mse);
    CHECK(h == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(grad.at("w").data[0] == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("gradient: zero residual gives zero gradient") {
    Rng rng(33);
    MlpProblem p = random_mlp(rng, Elementwise::Tanh, LossKind::Mse);
    p.batch.targets = evaluate(p.graph, p.params, p.batch.inputs);
    auto [h, grad] = gradient(p.graph, p.params, p.batch, LossKind::Mse);
    CHECK(h == 0.0);
    for (double x : grad.flatten()) CHECK(x == 0.0);
}

TEST_CASE("gradient matches finite differences on a 3-layer MLP") {
    Rng rng(34);
    MlpProblem p = random_mlp(rng, Elementwise::Tanh, LossKind::SoftmaxCrossEntropy, 2);
    ParamSet g = gradient(p.graph, p.params, p.batch, p.loss).second;
    ParamSet fd = oracles::fd_gradient(p.graph, p.params, p.batch, p.loss);
    CHECK(max_rel_err(g, fd) <= 1e-6);
}

TEST_CASE("jvp: linear map is exact, zero direction is zero") {
    Graph g = linear_graph();
    Rng rng(35);
    ParamSet params;
    params.add("w", rng.normal({3, 2}, 0.0, 1.0));
    Tensor x = rng.normal({4, 3}, 0.0, 1.0);
    ParamSet d;
    d.add("w", rng.normal({3, 2}, 0.0, 1.0));
    Tensor jd = jvp(g, params, x, d);
    Tensor want = matmul(x, d.at("w"));
    for (std::size_t i = 0; i < jd.size(); ++i) CHECK(jd.data[i] == want.data[i]);

    Tensor zero = jvp(g, params, x, d.zeros_like());
    for (double v : zero.data) CHECK(v == 0.0);
}

TEST_CASE("jvp matches central differences on a random MLP") {
    Rng rng(36);
    MlpProblem p = random_mlp(rng, Elementwise::Sigmoid, LossKind::SoftmaxCrossEntropy);
    ParamSet d = random_direction(p.params, rng);
    Tensor got = jvp(p.graph, p.params, p.batch.inputs, d);
    Tensor fd = oracles::fd_jvp(p.graph, p.params, p.batch.inputs, d);
    for (std::size_t i = 0; i < got.size(); ++i) CHECK(rel_err(got.data[i], fd.data[i]) <= 1e-6);
}

TEST_CASE("jvp: direction structure mismatch") {
    Graph g = linear_graph();
    ParamSet params = single_weight(2, 2, {1, 0, 0, 1});
    ParamSet bad;
    bad.add("w", Tensor::matrix(2, 1, {1, 1}));
    CHECK_THROWS_AS(jvp(g, params, Tensor::matrix(1, 2, {1, 1}), bad), std::invalid_argument);
}

TEST_CASE("hvp: quadratic from linear F + MSE gives A d") {
    // h(theta) = (1/2b) |X theta|^2, so the Hessian is A = X^T X / b.
    Rng rng(37);
    const std::size_t p_dim = 4, b = 6;
    Graph g = linear_graph();
    ParamSet params;
    params.add("w", rng.normal({p_dim, 1}, 0.0, 1.0));
    Batch batch;
    batch.inputs = rng.normal({b, p_dim}, 0.0, 1.0);
    batch.targets = Tensor::zeros({b, 1});
    ParamSet d;
    d.add("w", rng.normal({p_dim, 1}, 0.0, 1.0));
    ParamSet hd = hvp(g, params, batch, LossKind::Mse, d);
    for (std::size_t i = 0; i < p_dim; ++i) {
        double want = 0.0;
        for (std::size_t j = 0; j < p_dim; ++j) {
            double aij = 0.0;
            for (std::size_t r = 0; r < b; ++r)
                aij += batch.inputs.at2(r, i) * batch.inputs.at2(r, j);
            want += aij / (double)b * d.at("w").data[j];
        }
        CHECK(std::abs(hd.at("w").data[i] - want) < 1e-12);
    }
}

TEST_CASE("hvp symmetry on random MLPs") {
    Rng rng(38);
    for (int t = 0; t < 10; ++t) {
        MlpProblem p = random_mlp(rng, t % 2 ? Elementwise::Tanh : Elementwise::Sigmoid,
                                  LossKind::SoftmaxCrossEntropy);
        ParamSet d1 = random_direction(p.params, rng);
        ParamSet d2 = random_direction(p.params, rng);
        const double a = d1.dot(hvp(p.graph, p.params, p.batch, p.loss, d2));
        const double b = d2.dot(hvp(p.graph, p.params, p.batch, p.loss, d1));
        CHECK(rel_err(a, b) <= 1e-10);
    }
}

TEST_CASE("hvp matches dense finite-difference Hessian on a tiny net") {
    Rng rng(39);
    ModelSpec spec = make_mlp(2, {3}, 2, Elementwise::Tanh);  // 17 params
    Rng init(rng.next_u64());
    ParamSet params = init_params(spec, init);
    Graph g = build_graph(spec, 3);
    Batch batch;
    batch.inputs = rng.normal({3, 2}, 0.0, 1.0);
    batch.labels = {0, 1, 1};
    ParamSet d = random_direction(params, rng);

    // Dense FD Hessian times d, column by column via gradient differences.
    ParamSet fd = oracles::fd_hvp(g, params, batch, LossKind::SoftmaxCrossEntropy, d);
    ParamSet got = hvp(g, params, batch, LossKind::SoftmaxCrossEntropy, d);
    CHECK(max_rel_err(got, fd) <= 1e-5);
}

TEST_CASE("transpose consistency: <jvp(d), g> == <d, vjp(g)>") {
    Rng rng(40);
    for (int t = 0; t < 20; ++t) {
        MlpProblem p = random_mlp(rng, Elementwise::Tanh, LossKind::Mse);
        ParamSet d = random_direction(p.params, rng);
        Tensor preds = evaluate(p.graph, p.params, p.batch.inputs);
        Tensor g = rng.normal(preds.shape, 0.0, 1.0);
        const double lhs = dot(jvp(p.graph, p.params, p.batch.inputs, d), g);
        const double rhs = d.dot(vjp(p.graph, p.params, p.batch.inputs, g));
        CHECK(rel_err(lhs, rhs) <= 1e-10);
    }
}

TEST_CASE("gradient matches finite differences across activations") {
    Rng rng(41);
    for (Elementwise act : {Elementwise::Relu, Elementwise::Sigmoid, Elementwise::Tanh}) {
        for (int t = 0; t < 5; ++t) {
            MlpProblem p = random_mlp(rng, act, LossKind::SoftmaxCrossEntropy);
            ParamSet g = gradient(p.graph, p.params, p.batch, p.loss).second;
            ParamSet fd = oracles::fd_gradient(p.graph, p.params, p.batch, p.loss);
            CHECK(max_rel_err(g, fd) <= 1e-5);
        }
    }
}

TEST_CASE("non-finite loss carries the offending value") {
    Graph g = linear_graph();
    ParamSet params = single_weight(1, 1, {1e308});
    Batch batch;
    batch.inputs = Tensor::matrix(1, 1, {1e300});
    batch.targets = Tensor::matrix(1, 1, {0.0});
    CHECK_THROWS_AS((void)gradient(g, params, batch, LossKind::Mse), std::runtime_error);
}
