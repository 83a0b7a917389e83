#include "adler/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace adler {

std::size_t shape_numel(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

std::string shape_str(const std::vector<std::size_t>& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << "x";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

Tensor::Tensor(std::vector<std::size_t> shape_, std::vector<double> data_)
    : shape(std::move(shape_)), data(std::move(data_)) {
    if (shape_numel(shape) != data.size()) {
        throw std::invalid_argument("tensor shape " + shape_str(shape) + " does not match " +
                                    std::to_string(data.size()) + " elements");
    }
}

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
    std::size_t n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<double>(n, 0.0));
}

Tensor Tensor::full(std::vector<std::size_t> shape, double value) {
    std::size_t n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::scalar(double value) { return Tensor({}, {value}); }

Tensor Tensor::vector(std::vector<double> values) {
    std::size_t n = values.size();
    return Tensor({n}, std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
    return Tensor({rows, cols}, std::move(values));
}

bool Tensor::all_finite() const {
    for (double x : data)
        if (!std::isfinite(x)) return false;
    return true;
}

const char* elementwise_name(Elementwise op) {
    switch (op) {
        case Elementwise::Add: return "add";
        case Elementwise::Sub: return "sub";
        case Elementwise::Mul: return "mul";
        case Elementwise::Relu: return "relu";
        case Elementwise::Sigmoid: return "sigmoid";
        case Elementwise::Tanh: return "tanh";
        case Elementwise::Exp: return "exp";
        case Elementwise::Log: return "log";
    }
    return "?";
}

static bool is_binary(Elementwise op) {
    return op == Elementwise::Add || op == Elementwise::Sub || op == Elementwise::Mul;
}

Tensor elementwise(Elementwise op, const Tensor& a, const Tensor* b) {
    if (is_binary(op)) {
        if (b == nullptr)
            throw std::invalid_argument(std::string(elementwise_name(op)) +
                                        " requires a second operand");
        const bool a_scalar = a.size() == 1;
        const bool b_scalar = b->size() == 1;
        if (!a_scalar && !b_scalar && !a.same_shape(*b)) {
            throw std::invalid_argument(std::string(elementwise_name(op)) + ": shape mismatch " +
                                        shape_str(a.shape) + " vs " + shape_str(b->shape));
        }
        const Tensor& big = b_scalar && !a_scalar ? a : (a_scalar && !b_scalar ? *b : a);
        Tensor out = Tensor::zeros(big.shape);
        for (std::size_t i = 0; i < out.size(); ++i) {
            double x = a_scalar ? a.data[0] : a.data[i];
            double y = b_scalar ? b->data[0] : b->data[i];
            switch (op) {
                case Elementwise::Add: out.data[i] = x + y; break;
                case Elementwise::Sub: out.data[i] = x - y; break;
                case Elementwise::Mul: out.data[i] = x * y; break;
                default: break;
            }
        }
        return out;
    }
    if (b != nullptr)
        throw std::invalid_argument(std::string(elementwise_name(op)) + " is unary");
    Tensor out = Tensor::zeros(a.shape);
    for (std::size_t i = 0; i < a.size(); ++i) {
        double x = a.data[i];
        switch (op) {
            case Elementwise::Relu: out.data[i] = x > 0.0 ? x : 0.0; break;
            case Elementwise::Sigmoid: out.data[i] = 1.0 / (1.0 + std::exp(-x)); break;
            case Elementwise::Tanh: out.data[i] = std::tanh(x); break;
            case Elementwise::Exp: out.data[i] = std::exp(x); break;
            case Elementwise::Log: out.data[i] = std::log(x); break;
            default: break;
        }
    }
    return out;
}

Tensor add(const Tensor& a, const Tensor& b) { return elementwise(Elementwise::Add, a, &b); }
Tensor sub(const Tensor& a, const Tensor& b) { return elementwise(Elementwise::Sub, a, &b); }
Tensor mul(const Tensor& a, const Tensor& b) { return elementwise(Elementwise::Mul, a, &b); }

Tensor scale(const Tensor& a, double s) {
    Tensor out = a;
    for (double& x : out.data) x *= s;
    return out;
}

double dot(const Tensor& a, const Tensor& b) {
    if (a.size() != b.size())
        throw std::invalid_argument("dot: size mismatch " + shape_str(a.shape) + " vs " +
                                    shape_str(b.shape));
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a.data[i] * b.data[i];
    return s;
}

Tensor matmul(const Tensor& a, const Tensor& b, bool trans_a, bool trans_b) {
    if (a.rank() != 2 || b.rank() != 2)
        throw std::invalid_argument("matmul requires rank-2 tensors, got " + shape_str(a.shape) +
                                    " and " + shape_str(b.shape));
    const std::size_t m = trans_a ? a.shape[1] : a.shape[0];
    const std::size_t k = trans_a ? a.shape[0] : a.shape[1];
    const std::size_t k2 = trans_b ? b.shape[1] : b.shape[0];
    const std::size_t n = trans_b ? b.shape[0] : b.shape[1];
    if (k != k2)
        throw std::invalid_argument("matmul: inner dimensions disagree, " + shape_str(a.shape) +
                                    (trans_a ? "^T" : "") + " * " + shape_str(b.shape) +
                                    (trans_b ? "^T" : ""));
    Tensor out = Tensor::zeros({m, n});
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
            const double av = trans_a ? a.at2(p, i) : a.at2(i, p);
            if (av == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) {
                const double bv = trans_b ? b.at2(j, p) : b.at2(p, j);
                out.at2(i, j) += av * bv;
            }
        }
    }
    return out;
}

std::vector<std::size_t> conv2d_out_shape(const std::vector<std::size_t>& input,
                                          const std::vector<std::size_t>& kernel,
                                          Padding padding) {
    if (input.size() != 4 || kernel.size() != 4)
        throw std::invalid_argument("conv2d requires input [b,c,h,w] and kernel [o,c,kh,kw], got " +
                                    shape_str(input) + " and " + shape_str(kernel));
    if (input[1] != kernel[1])
        throw std::invalid_argument("conv2d: channel mismatch, input " + shape_str(input) +
                                    " vs kernel " + shape_str(kernel));
    const std::size_t h = input[2], w = input[3];
    const std::size_t kh = kernel[2], kw = kernel[3];
    if (padding == Padding::Valid) {
        if (kh > h || kw > w)
            throw std::invalid_argument("conv2d: kernel " + shape_str(kernel) +
                                        " larger than input " + shape_str(input));
        return {input[0], kernel[0], h - kh + 1, w - kw + 1};
    }
    return {input[0], kernel[0], h, w};
}

namespace {

// Shared index walk for the forward pass and both adjoints: every (output
// position, kernel position) pair maps to one input position.
template <typename Body>
void conv2d_walk(const std::vector<std::size_t>& in_shape,
                 const std::vector<std::size_t>& k_shape, Padding padding, Body body) {
    const auto out_shape = conv2d_out_shape(in_shape, k_shape, padding);
    const std::size_t bsz = in_shape[0], ch = in_shape[1], h = in_shape[2], w = in_shape[3];
    const std::size_t oc = k_shape[0], kh = k_shape[2], kw = k_shape[3];
    const std::size_t oh = out_shape[2], ow = out_shape[3];
    const std::ptrdiff_t ph = padding == Padding::Same ? (std::ptrdiff_t)(kh - 1) / 2 : 0;
    const std::ptrdiff_t pw = padding == Padding::Same ? (std::ptrdiff_t)(kw - 1) / 2 : 0;
    for (std::size_t b = 0; b < bsz; ++b)
        for (std::size_t o = 0; o < oc; ++o)
            for (std::size_t y = 0; y < oh; ++y)
                for (std::size_t x = 0; x < ow; ++x)
                    for (std::size_t c = 0; c < ch; ++c)
                        for (std::size_t i = 0; i < kh; ++i) {
                            const std::ptrdiff_t iy = (std::ptrdiff_t)(y + i) - ph;
                            if (iy < 0 || iy >= (std::ptrdiff_t)h) continue;
                            for (std::size_t j = 0; j < kw; ++j) {
                                const std::ptrdiff_t ix = (std::ptrdiff_t)(x + j) - pw;
                                if (ix < 0 || ix >= (std::ptrdiff_t)w) continue;
                                body(b, c, (std::size_t)iy, (std::size_t)ix, o, i, j, y, x);
                            }
                        }
}

}  // namespace

void conv2d_acc(const Tensor& input, const Tensor& kernel, Padding padding, Tensor& out) {
    conv2d_walk(input.shape, kernel.shape, padding,
                [&](std::size_t b, std::size_t c, std::size_t iy, std::size_t ix, std::size_t o,
                    std::size_t i, std::size_t j, std::size_t y, std::size_t x) {
                    out.at4(b, o, y, x) += input.at4(b, c, iy, ix) * kernel.at4(o, c, i, j);
                });
}

void conv2d_input_grad_acc(const Tensor& out_grad, const Tensor& kernel, Padding padding,
                           Tensor& input_grad) {
    conv2d_walk(input_grad.shape, kernel.shape, padding,
                [&](std::size_t b, std::size_t c, std::size_t iy, std::size_t ix, std::size_t o,
                    std::size_t i, std::size_t j, std::size_t y, std::size_t x) {
                    input_grad.at4(b, c, iy, ix) += out_grad.at4(b, o, y, x) * kernel.at4(o, c, i, j);
                });
}

void conv2d_kernel_grad_acc(const Tensor& input, const Tensor& out_grad, Padding padding,
                            Tensor& kernel_grad) {
    conv2d_walk(input.shape, kernel_grad.shape, padding,
                [&](std::size_t b, std::size_t c, std::size_t iy, std::size_t ix, std::size_t o,
                    std::size_t i, std::size_t j, std::size_t y, std::size_t x) {
                    kernel_grad.at4(o, c, i, j) += input.at4(b, c, iy, ix) * out_grad.at4(b, o, y, x);
                });
}

Tensor conv2d(const Tensor& input, const Tensor& kernel, Padding padding) {
    Tensor out = Tensor::zeros(conv2d_out_shape(input.shape, kernel.shape, padding));
    conv2d_acc(input, kernel, padding, out);
    return out;
}

std::uint64_t Rng::next_u64() {
    // splitmix64
    state += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

double Rng::next_uniform() {
    // 53 random bits, shifted into (0,1)
    return ((double)(next_u64() >> 11) + 0.5) * (1.0 / 9007199254740992.0);
}

double Rng::next_normal() {
    const double u1 = next_uniform();
    const double u2 = next_uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

Tensor Rng::normal(std::vector<std::size_t> shape, double mean, double std) {
    if (std < 0.0) throw std::invalid_argument("rng_normal: negative std");
    Tensor out = Tensor::zeros(std::move(shape));
    for (double& x : out.data) x = mean + std * next_normal();
    return out;
}

Tensor Rng::uniform(std::vector<std::size_t> shape, double lo, double hi) {
    Tensor out = Tensor::zeros(std::move(shape));
    for (double& x : out.data) x = lo + (hi - lo) * next_uniform();
    return out;
}

std::vector<std::size_t> Rng::permutation(std::size_t n) {
    std::vector<std::size_t> p(n);
    for (std::size_t i = 0; i < n; ++i) p[i] = i;
    for (std::size_t i = n; i > 1; --i) {
        std::size_t j = next_u64() % i;
        std::swap(p[i - 1], p[j]);
    }
    return p;
}

std::uint64_t Rng::mix(std::uint64_t seed, std::uint64_t stream) {
    Rng r(seed ^ (0xA5A5A5A5DEADBEEFULL * (stream + 1)));
    return r.next_u64();
}

}  // namespace adler
