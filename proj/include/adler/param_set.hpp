#pragma once

#include <string>
#include <utility>
#include <vector>

#include "adler/tensor.hpp"

namespace adler {

/// Ordered named collection of tensors representing the parameter vector.
/// Order is significant: flatten/unflatten walk entries in declaration order.
struct ParamSet {
    std::vector<std::pair<std::string, Tensor>> items;

    void add(std::string name, Tensor value) { items.emplace_back(std::move(name), std::move(value)); }

    bool contains(const std::string& name) const;
    const Tensor& at(const std::string& name) const;
    Tensor& at(const std::string& name);

    std::size_t total_size() const;

    std::vector<double> flatten() const;
    /// Rebuilds a set with this set's names/shapes from a flat vector.
    ParamSet unflatten(const std::vector<double>& flat) const;

    ParamSet zeros_like() const;
    bool same_structure(const ParamSet& other) const;

    double dot(const ParamSet& other) const;
    double squared_norm() const { return dot(*this); }
    /// this += a * x
    void axpy(double a, const ParamSet& x);
    void scale_inplace(double s);
};

}  // namespace adler
