#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "dexr/error.hpp"
#include "dexr/numerics/tape.hpp"
#include "dexr/numerics/tensor.hpp"

namespace dexr {

/// Ordered collection of named tensors. Insertion order is the canonical
/// order for serialisation, gradient reduction and norm computation.
template <class Real>
class basic_parameter_set {
public:
    using tensor_type = basic_tensor<Real>;

    void add(std::string name, tensor_type value) {
        if (index_.count(name)) throw validation_error("parameter '" + name + "' registered twice");
        index_.emplace(name, values_.size());
        names_.push_back(std::move(name));
        values_.push_back(std::move(value));
    }

    std::size_t size() const noexcept { return values_.size(); }
    bool contains(std::string_view name) const { return index_.count(std::string(name)) != 0; }

    std::size_t index_of(std::string_view name) const {
        auto it = index_.find(std::string(name));
        if (it == index_.end()) throw validation_error("unknown parameter '" + std::string(name) + "'");
        return it->second;
    }

    tensor_type& at(std::string_view name) { return values_[index_of(name)]; }
    const tensor_type& at(std::string_view name) const { return values_[index_of(name)]; }
    tensor_type& operator[](std::size_t i) { return values_[i]; }
    const tensor_type& operator[](std::size_t i) const { return values_[i]; }
    const std::string& name(std::size_t i) const { return names_[i]; }
    const std::vector<std::string>& names() const noexcept { return names_; }

    /// Total number of scalars.
    std::size_t scalar_count() const {
        std::size_t n = 0;
        for (const auto& v : values_) n += v.size();
        return n;
    }

    basic_parameter_set zeros_like() const {
        basic_parameter_set out;
        for (std::size_t i = 0; i < size(); ++i) out.add(names_[i], tensor_type(values_[i].shape()));
        return out;
    }

    /// this += scale * other, matched by position.
    void axpy(Real scale, const basic_parameter_set& other) {
        if (other.size() != size()) throw shape_error("parameter_set::axpy: size mismatch");
        for (std::size_t i = 0; i < size(); ++i) {
            auto dst = values_[i].values();
            auto src = other.values_[i].values();
            if (dst.size() != src.size())
                throw shape_error("parameter_set::axpy: '" + names_[i] + "' shape mismatch");
            for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += scale * src[j];
        }
    }

    Real squared_norm() const {
        Real s{0};
        for (const auto& v : values_)
            for (Real x : v.values()) s += x * x;
        return s;
    }

    friend bool operator==(const basic_parameter_set& a, const basic_parameter_set& b) {
        return a.names_ == b.names_ && a.values_ == b.values_;
    }

private:
    std::vector<std::string> names_;
    std::vector<tensor_type> values_;
    std::unordered_map<std::string, std::size_t> index_;
};

using parameter_set = basic_parameter_set<double>;

/// Parameters placed on a tape as gradient-carrying leaves.
template <class Real>
class bound_parameters {
public:
    bound_parameters(basic_tape<Real>& tape, const basic_parameter_set<Real>& params, bool trainable = true)
        : params_(&params) {
        vars_.reserve(params.size());
        for (std::size_t i = 0; i < params.size(); ++i)
            vars_.push_back(trainable ? tape.variable(params[i]) : tape.constant(params[i]));
    }

    basic_var<Real> operator[](std::string_view name) const { return vars_[params_->index_of(name)]; }
    basic_var<Real> operator[](std::size_t i) const { return vars_[i]; }
    std::size_t size() const noexcept { return vars_.size(); }
    const basic_parameter_set<Real>& source() const noexcept { return *params_; }

    /// Per-parameter gradient after tape.backward(); unreached parameters get zeros.
    basic_parameter_set<Real> gradients() const {
        basic_parameter_set<Real> out;
        for (std::size_t i = 0; i < vars_.size(); ++i)
            out.add(params_->name(i), vars_[i].tape().grad(vars_[i]));
        return out;
    }

private:
    const basic_parameter_set<Real>* params_;
    std::vector<basic_var<Real>> vars_;
};

/// Runs the reverse pass from `loss` and returns one gradient per parameter.
template <class Real>
basic_parameter_set<Real> backward(basic_tape<Real>& tape, basic_var<Real> loss,
                                   const bound_parameters<Real>& params) {
    tape.backward(loss);
    return params.gradients();
}

}  // namespace dexr
