#include "adler/models.hpp"

#include <cmath>
#include <stdexcept>

namespace adler {

LayerSpec LayerSpec::dense(int out_dim) {
    LayerSpec l;
    l.kind = Kind::Dense;
    l.out_dim = out_dim;
    return l;
}

LayerSpec LayerSpec::conv(int out_channels, int kernel, Padding pad) {
    LayerSpec l;
    l.kind = Kind::Conv;
    l.out_channels = out_channels;
    l.kernel = kernel;
    l.pad = pad;
    return l;
}

LayerSpec LayerSpec::activation(Elementwise act) {
    LayerSpec l;
    l.kind = Kind::Activation;
    l.act = act;
    return l;
}

LayerSpec LayerSpec::residual(std::vector<LayerSpec> inner) {
    LayerSpec l;
    l.kind = Kind::Residual;
    l.inner = std::move(inner);
    return l;
}

LayerSpec LayerSpec::flatten() {
    LayerSpec l;
    l.kind = Kind::Flatten;
    return l;
}

void ModelSpec::validate() const {
    if (layers.empty()) return;  // empty spec allowed (param_count == 0)
    if (layers.back().kind != LayerSpec::Kind::Dense)
        throw std::invalid_argument("model: last layer must be dense with no following activation");
    if (layers.back().out_dim != output_dim)
        throw std::invalid_argument("model: last dense out_dim " +
                                    std::to_string(layers.back().out_dim) +
                                    " does not match output_dim " + std::to_string(output_dim));
}

namespace {

struct ParamInfo {
    std::string name;
    std::vector<std::size_t> shape;
    std::size_t fan_in;
    double gain;  // 2 when the layer feeds a relu, else 1
    bool is_bias;
};

bool next_is_relu(const std::vector<LayerSpec>& layers, std::size_t i) {
    for (std::size_t j = i + 1; j < layers.size(); ++j) {
        if (layers[j].kind == LayerSpec::Kind::Flatten) continue;
        return layers[j].kind == LayerSpec::Kind::Activation &&
               layers[j].act == Elementwise::Relu;
    }
    return false;
}

// Walks layers, propagating the per-example shape (batch dim excluded) and
// emitting one ParamInfo per weight/bias tensor in declaration order.
void collect_params(const std::vector<LayerSpec>& layers, std::vector<std::size_t>& shape,
                    const std::string& prefix, std::vector<ParamInfo>& out) {
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const LayerSpec& l = layers[i];
        const std::string base = prefix + "layer" + std::to_string(i);
        switch (l.kind) {
            case LayerSpec::Kind::Dense: {
                if (shape.size() != 1)
                    throw std::invalid_argument(base + ": dense needs a flat input, got shape " +
                                                shape_str(shape) + " (insert flatten)");
                const std::size_t in_dim = shape[0];
                const std::size_t out_dim = (std::size_t)l.out_dim;
                const double gain = next_is_relu(layers, i) ? 2.0 : 1.0;
                out.push_back({base + ".w", {in_dim, out_dim}, in_dim, gain, false});
                out.push_back({base + ".b", {out_dim}, in_dim, gain, true});
                shape = {out_dim};
                break;
            }
            case LayerSpec::Kind::Conv: {
                if (shape.size() != 3)
                    throw std::invalid_argument(base + ": conv needs a [c,h,w] input, got " +
                                                shape_str(shape));
                const std::size_t c = shape[0];
                const std::size_t k = (std::size_t)l.kernel;
                const std::size_t o = (std::size_t)l.out_channels;
                const double gain = next_is_relu(layers, i) ? 2.0 : 1.0;
                out.push_back({base + ".w", {o, c, k, k}, c * k * k, gain, false});
                out.push_back({base + ".b", {o}, c * k * k, gain, true});
                const auto os = conv2d_out_shape({1, c, shape[1], shape[2]}, {o, c, k, k}, l.pad);
                shape = {os[1], os[2], os[3]};
                break;
            }
            case LayerSpec::Kind::Activation:
                break;
            case LayerSpec::Kind::Flatten:
                shape = {shape_numel(shape)};
                break;
            case LayerSpec::Kind::Residual: {
                std::vector<std::size_t> inner_shape = shape;
                collect_params(l.inner, inner_shape, base + ".", out);
                if (inner_shape != shape)
                    throw std::invalid_argument(base + ": residual body changes shape " +
                                                shape_str(shape) + " -> " +
                                                shape_str(inner_shape));
                break;
            }
        }
    }
}

std::vector<ParamInfo> model_params(const ModelSpec& spec) {
    spec.validate();
    std::vector<ParamInfo> out;
    std::vector<std::size_t> shape = spec.input_shape;
    collect_params(spec.layers, shape, "", out);
    if (!spec.layers.empty() && shape != std::vector<std::size_t>{(std::size_t)spec.output_dim})
        throw std::invalid_argument("model: final shape " + shape_str(shape) +
                                    " does not match output_dim " +
                                    std::to_string(spec.output_dim));
    return out;
}

int build_layers(Graph& g, const std::vector<LayerSpec>& layers, int cur,
                 const std::string& prefix) {
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const LayerSpec& l = layers[i];
        const std::string base = prefix + "layer" + std::to_string(i);
        switch (l.kind) {
            case LayerSpec::Kind::Dense: {
                Node w; w.kind = OpKind::Param;
                w.name = base + ".w";
                const int wid = g.add_node(w);
                Node mm; mm.kind = OpKind::MatMul;
                mm.a = cur;
                mm.b = wid;
                const int mid = g.add_node(mm);
                Node b; b.kind = OpKind::Param;
                b.name = base + ".b";
                const int bid = g.add_node(b);
                Node ab; ab.kind = OpKind::AddBias;
                ab.a = mid;
                ab.b = bid;
                cur = g.add_node(ab);
                break;
            }
            case LayerSpec::Kind::Conv: {
                Node w; w.kind = OpKind::Param;
                w.name = base + ".w";
                const int wid = g.add_node(w);
                Node cv; cv.kind = OpKind::Conv2d;
                cv.a = cur;
                cv.b = wid;
                cv.pad = l.pad;
                const int cid = g.add_node(cv);
                Node b; b.kind = OpKind::Param;
                b.name = base + ".b";
                const int bid = g.add_node(b);
                Node ab; ab.kind = OpKind::AddBias;
                ab.a = cid;
                ab.b = bid;
                cur = g.add_node(ab);
                break;
            }
            case LayerSpec::Kind::Activation: {
                Node a; a.kind = OpKind::Activation;
                a.a = cur;
                a.act = l.act;
                cur = g.add_node(a);
                break;
            }
            case LayerSpec::Kind::Flatten: {
                Node f; f.kind = OpKind::Flatten;
                f.a = cur;
                cur = g.add_node(f);
                break;
            }
            case LayerSpec::Kind::Residual: {
                const int skip = cur;
                const int body = build_layers(g, l.inner, cur, base + ".");
                Node s; s.kind = OpKind::AddTensors;
                s.a = body;
                s.b = skip;
                cur = g.add_node(s);
                break;
            }
        }
    }
    return cur;
}

}  // namespace

ParamSet init_params(const ModelSpec& spec, Rng& rng) {
    ParamSet params;
    for (const ParamInfo& info : model_params(spec)) {
        if (info.is_bias) {
            params.add(info.name, Tensor::zeros(info.shape));
        } else {
            const double std = std::sqrt(info.gain / (double)info.fan_in);
            params.add(info.name, rng.normal(info.shape, 0.0, std));
        }
    }
    return params;
}

std::size_t param_count(const ModelSpec& spec) {
    std::size_t n = 0;
    for (const ParamInfo& info : model_params(spec)) n += shape_numel(info.shape);
    return n;
}

Graph build_graph(const ModelSpec& spec, std::size_t batch_size) {
    if (batch_size < 1) throw std::invalid_argument("build_graph: batch_size must be >= 1");
    model_params(spec);  // shape validation
    Graph g;
    Node in; in.kind = OpKind::Input;
    g.input_node = g.add_node(in);
    g.output = build_layers(g, spec.layers, g.input_node, "");
    return g;
}

ModelSpec make_mlp(std::size_t input_dim, const std::vector<int>& widths, int output_dim,
                   Elementwise act) {
    ModelSpec spec;
    spec.input_shape = {input_dim};
    spec.output_dim = output_dim;
    for (int w : widths) {
        spec.layers.push_back(LayerSpec::dense(w));
        spec.layers.push_back(LayerSpec::activation(act));
    }
    spec.layers.push_back(LayerSpec::dense(output_dim));
    return spec;
}

}  // namespace adler
