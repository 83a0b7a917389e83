#include "adler/param_set.hpp"

#include <stdexcept>

namespace adler {

bool ParamSet::contains(const std::string& name) const {
    for (const auto& [n, t] : items)
        if (n == name) return true;
    return false;
}

const Tensor& ParamSet::at(const std::string& name) const {
    for (const auto& [n, t] : items)
        if (n == name) return t;
    throw std::out_of_range("ParamSet: no parameter named '" + name + "'");
}

Tensor& ParamSet::at(const std::string& name) {
    for (auto& [n, t] : items)
        if (n == name) return t;
    throw std::out_of_range("ParamSet: no parameter named '" + name + "'");
}

std::size_t ParamSet::total_size() const {
    std::size_t n = 0;
    for (const auto& [name, t] : items) n += t.size();
    return n;
}

std::vector<double> ParamSet::flatten() const {
    std::vector<double> flat;
    flat.reserve(total_size());
    for (const auto& [name, t] : items) flat.insert(flat.end(), t.data.begin(), t.data.end());
    return flat;
}

ParamSet ParamSet::unflatten(const std::vector<double>& flat) const {
    if (flat.size() != total_size())
        throw std::invalid_argument("unflatten: got " + std::to_string(flat.size()) +
                                    " values, expected " + std::to_string(total_size()));
    ParamSet out;
    std::size_t pos = 0;
    for (const auto& [name, t] : items) {
        Tensor nt = Tensor::zeros(t.shape);
        for (std::size_t i = 0; i < nt.size(); ++i) nt.data[i] = flat[pos++];
        out.add(name, std::move(nt));
    }
    return out;
}

ParamSet ParamSet::zeros_like() const {
    ParamSet out;
    for (const auto& [name, t] : items) out.add(name, Tensor::zeros(t.shape));
    return out;
}

bool ParamSet::same_structure(const ParamSet& other) const {
    if (items.size() != other.items.size()) return false;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (items[i].first != other.items[i].first) return false;
        if (items[i].second.shape != other.items[i].second.shape) return false;
    }
    return true;
}

double ParamSet::dot(const ParamSet& other) const {
    if (!same_structure(other)) throw std::invalid_argument("ParamSet::dot: structure mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < items.size(); ++i)
        s += adler::dot(items[i].second, other.items[i].second);
    return s;
}

void ParamSet::axpy(double a, const ParamSet& x) {
    if (!same_structure(x)) throw std::invalid_argument("ParamSet::axpy: structure mismatch");
    for (std::size_t i = 0; i < items.size(); ++i) {
        auto& dst = items[i].second.data;
        const auto& src = x.items[i].second.data;
        for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += a * src[j];
    }
}

void ParamSet::scale_inplace(double s) {
    for (auto& [name, t] : items)
        for (double& x : t.data) x *= s;
}

}  // namespace adler
