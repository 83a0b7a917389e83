#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace adler {

/// Dense row-major tensor of 64-bit floats. Value type: every operation
/// returns a fresh tensor and never mutates its arguments.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;
    Tensor(std::vector<std::size_t> shape_, std::vector<double> data_);

    static Tensor zeros(std::vector<std::size_t> shape);
    static Tensor full(std::vector<std::size_t> shape, double value);
    static Tensor scalar(double value);
    static Tensor vector(std::vector<double> values);
    static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

    std::size_t size() const { return data.size(); }
    std::size_t rank() const { return shape.size(); }
    bool empty() const { return data.empty(); }

    double& operator[](std::size_t i) { return data[i]; }
    double operator[](std::size_t i) const { return data[i]; }

    // 2-D / 4-D accessors used by matmul and conv kernels.
    double& at2(std::size_t r, std::size_t c) { return data[r * shape[1] + c]; }
    double at2(std::size_t r, std::size_t c) const { return data[r * shape[1] + c]; }
    double& at4(std::size_t a, std::size_t b, std::size_t c, std::size_t d) {
        return data[((a * shape[1] + b) * shape[2] + c) * shape[3] + d];
    }
    double at4(std::size_t a, std::size_t b, std::size_t c, std::size_t d) const {
        return data[((a * shape[1] + b) * shape[2] + c) * shape[3] + d];
    }

    bool same_shape(const Tensor& other) const { return shape == other.shape; }
    bool all_finite() const;
};

std::string shape_str(const std::vector<std::size_t>& shape);
std::size_t shape_numel(const std::vector<std::size_t>& shape);

enum class Elementwise { Add, Sub, Mul, Relu, Sigmoid, Tanh, Exp, Log };

const char* elementwise_name(Elementwise op);

/// Applies `op` per element. Binary ops require identical shapes, except that
/// a rank-0/size-1 operand on either side is treated as a scalar.
Tensor elementwise(Elementwise op, const Tensor& a, const Tensor* b = nullptr);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);

double dot(const Tensor& a, const Tensor& b);

/// Standard matrix product with optional transposes, 64-bit accumulation.
Tensor matmul(const Tensor& a, const Tensor& b, bool trans_a = false, bool trans_b = false);

enum class Padding { Same, Valid };

/// Cross-correlation (no kernel flip), stride 1. Input [b,c,h,w], kernel
/// [o,c,kh,kw]. `Same` zero-pads with (k-1)/2 on the leading side so the
/// spatial dims are preserved.
Tensor conv2d(const Tensor& input, const Tensor& kernel, Padding padding);

// Accumulating building blocks shared by the forward pass and both adjoints.
void conv2d_acc(const Tensor& input, const Tensor& kernel, Padding padding, Tensor& out);
void conv2d_input_grad_acc(const Tensor& out_grad, const Tensor& kernel, Padding padding,
                           Tensor& input_grad);
void conv2d_kernel_grad_acc(const Tensor& input, const Tensor& out_grad, Padding padding,
                            Tensor& kernel_grad);

std::vector<std::size_t> conv2d_out_shape(const std::vector<std::size_t>& input,
                                          const std::vector<std::size_t>& kernel,
                                          Padding padding);

/// Seedable splitmix64 generator. The whole pipeline is bit-reproducible
/// from the seed; no libc RNG state is involved.
struct Rng {
    std::uint64_t state;

    explicit Rng(std::uint64_t seed) : state(seed) {}

    std::uint64_t next_u64();
    /// Uniform in (0,1).
    double next_uniform();
    /// Standard normal via Box-Muller.
    double next_normal();

    Tensor normal(std::vector<std::size_t> shape, double mean, double std);
    Tensor uniform(std::vector<std::size_t> shape, double lo, double hi);
    std::vector<std::size_t> permutation(std::size_t n);

    /// Derives an independent stream, e.g. per grid-search arm.
    static std::uint64_t mix(std::uint64_t seed, std::uint64_t stream);
};

}  // namespace adler
