#pragma once

#include <string>
#include <vector>

#include "adler/graph.hpp"
#include "adler/param_set.hpp"
#include "adler/tensor.hpp"

namespace adler {

struct LayerSpec {
    enum class Kind { Dense, Conv, Activation, Residual, Flatten };
    Kind kind;
    int out_dim = 0;                // Dense
    int out_channels = 0;           // Conv
    int kernel = 0;                 // Conv (square kernel)
    Padding pad = Padding::Same;    // Conv
    Elementwise act = Elementwise::Relu;  // Activation
    std::vector<LayerSpec> inner;   // Residual block body

    static LayerSpec dense(int out_dim);
    static LayerSpec conv(int out_channels, int kernel, Padding pad = Padding::Same);
    static LayerSpec activation(Elementwise act);
    static LayerSpec residual(std::vector<LayerSpec> inner);
    static LayerSpec flatten();
};

/// Declarative model: layers applied in order to a batch whose trailing
/// shape is `input_shape`. The final layer must be a dense layer with no
/// following activation, producing `output_dim` logits.
struct ModelSpec {
    std::vector<std::size_t> input_shape;  // per-example shape, e.g. {2} or {1,8,8}
    int output_dim = 0;
    std::vector<LayerSpec> layers;

    void validate() const;
};

ParamSet init_params(const ModelSpec& spec, Rng& rng);
Graph build_graph(const ModelSpec& spec, std::size_t batch_size);
std::size_t param_count(const ModelSpec& spec);

/// MLP helper: input_dim -> widths... -> output_dim with the given
/// activation between dense layers. Used by the width-sweep checks.
ModelSpec make_mlp(std::size_t input_dim, const std::vector<int>& widths, int output_dim,
                   Elementwise act);

}  // namespace adler
