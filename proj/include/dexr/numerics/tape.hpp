#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dexr/error.hpp"
#include "dexr/numerics/tensor.hpp"

namespace dexr {

template <class Real>
class basic_tape;

/// Handle to one value recorded on a tape. Cheap to copy; valid while the
/// tape is alive and not cleared.
template <class Real>
class basic_var {
public:
    basic_var() = default;
    basic_var(basic_tape<Real>* tape, std::size_t id) : tape_(tape), id_(id) {}

    std::size_t id() const noexcept { return id_; }
    basic_tape<Real>& tape() const { return *tape_; }
    bool valid() const noexcept { return tape_ != nullptr; }

    const basic_tensor<Real>& value() const { return tape_->value(id_); }
    const typename basic_tensor<Real>::shape_type& shape() const { return value().shape(); }
    std::size_t rows() const { return value().rows(); }
    std::size_t cols() const { return value().cols(); }

private:
    basic_tape<Real>* tape_ = nullptr;
    std::size_t id_ = 0;
};

/// Append-only record of primitive operations. Nodes are stored in creation
/// order, which is a topological order, so backward() walks the vector in
/// reverse.
template <class Real>
class basic_tape {
public:
    using tensor_type = basic_tensor<Real>;
    using var_type = basic_var<Real>;
    /// Called with the tape and the id of the node whose gradient is complete.
    using backward_fn = std::function<void(basic_tape&, std::size_t)>;

    basic_tape() {
#ifndef NDEBUG
        check_finite_ = true;
#endif
    }
    basic_tape(const basic_tape&) = delete;
    basic_tape& operator=(const basic_tape&) = delete;

    /// Reject non-finite forward values as soon as they are recorded.
    void set_check_finite(bool on) noexcept { check_finite_ = on; }

    var_type constant(tensor_type value) { return push("constant", std::move(value), false, {}); }
    var_type variable(tensor_type value) { return push("variable", std::move(value), true, {}); }

    /// Records an op output. The node needs a gradient iff any input does; the
    /// backward closure is dropped otherwise.
    var_type record(std::string_view op, tensor_type value, std::initializer_list<var_type> inputs,
                    backward_fn fn) {
        bool needs = false;
        for (const auto& v : inputs) needs = needs || nodes_[v.id()].requires_grad;
        return push(op, std::move(value), needs, needs ? std::move(fn) : backward_fn{});
    }

    var_type record(std::string_view op, tensor_type value, const std::vector<var_type>& inputs,
                    backward_fn fn) {
        bool needs = false;
        for (const auto& v : inputs) needs = needs || nodes_[v.id()].requires_grad;
        return push(op, std::move(value), needs, needs ? std::move(fn) : backward_fn{});
    }

    std::size_t size() const noexcept { return nodes_.size(); }
    bool empty() const noexcept { return nodes_.empty(); }
    void clear() { nodes_.clear(); }

    const tensor_type& value(std::size_t id) const { return nodes_[id].value; }
    bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
    bool requires_grad(var_type v) const { return requires_grad(v.id()); }
    bool has_grad(std::size_t id) const { return !nodes_[id].grad.empty(); }

    /// Gradient buffer of a node; zeros of the value's shape when unreached.
    tensor_type grad(var_type v) const {
        const auto& n = nodes_[v.id()];
        if (!n.grad.empty()) return n.grad;
        return tensor_type(n.value.shape());
    }

    const tensor_type& grad_ref(std::size_t id) const { return nodes_[id].grad; }

    /// Mutable gradient buffer of an input that needs one, allocated lazily.
    /// Returns an empty span for inputs that do not require gradients.
    std::span<Real> grad_buffer(std::size_t id) {
        auto& n = nodes_[id];
        if (!n.requires_grad) return {};
        if (n.grad.empty()) n.grad = tensor_type(n.value.shape());
        return n.grad.values();
    }

    void backward(var_type loss) {
        if (nodes_.empty()) throw error("backward: empty tape");
        if (loss.id() >= nodes_.size()) throw error("backward: loss not on this tape");
        const auto& lv = nodes_[loss.id()].value;
        if (!lv.is_scalar())
            throw shape_error("backward: loss must be scalar, got shape " + shape_string(lv.shape()));
        for (auto& n : nodes_) n.grad = tensor_type{};
        if (!nodes_[loss.id()].requires_grad) return;
        nodes_[loss.id()].grad = tensor_type(lv.shape(), Real{1});
        for (std::size_t i = loss.id() + 1; i-- > 0;) {
            auto& n = nodes_[i];
            if (n.grad.empty() || !n.backward) continue;
            n.backward(*this, i);
        }
    }

    std::string_view op_name(std::size_t id) const { return nodes_[id].op; }

private:
    struct node {
        std::string_view op;
        tensor_type value;
        tensor_type grad;
        backward_fn backward;
        bool requires_grad = false;
    };

    var_type push(std::string_view op, tensor_type value, bool requires_grad, backward_fn fn) {
        if (check_finite_ && !value.all_finite())
            throw domain_error(std::string(op) + ": non-finite output");
        nodes_.push_back(node{op, std::move(value), tensor_type{}, std::move(fn), requires_grad});
        return var_type(this, nodes_.size() - 1);
    }

    std::vector<node> nodes_;
    bool check_finite_ = false;
};

using tape = basic_tape<double>;
using var = basic_var<double>;

/// Boolean visibility matrix for attention: allowed(r, c) says whether query
/// row r may attend to key row c.
struct attention_mask {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<unsigned char> allowed;

    attention_mask() = default;
    attention_mask(std::size_t r, std::size_t c, bool value = true)
        : rows(r), cols(c), allowed(r * c, value ? 1 : 0) {}

    bool operator()(std::size_t r, std::size_t c) const { return allowed[r * cols + c] != 0; }
    void set(std::size_t r, std::size_t c, bool value) { allowed[r * cols + c] = value ? 1 : 0; }
};

namespace detail {

template <class Real>
void require_same_shape(std::string_view op, const basic_var<Real>& a, const basic_var<Real>& b) {
    if (a.value().shape() != b.value().shape())
        throw shape_error(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                          shape_string(b.shape()));
}

template <class Real>
void require_matrix(std::string_view op, const basic_var<Real>& a) {
    if (a.value().rank() > 2)
        throw shape_error(std::string(op) + ": expected rank <= 2, got " + shape_string(a.shape()));
}

template <class Real, class F>
basic_var<Real> unary(std::string_view op, basic_var<Real> a, F&& f,
                      std::function<Real(Real x, Real y)> dfdx) {
    const auto& x = a.value();
    basic_tensor<Real> out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = f(x[i]);
    const std::size_t ia = a.id();
    return a.tape().record(op, std::move(out), {a}, [ia, dfdx](basic_tape<Real>& t, std::size_t self) {
        auto ga = t.grad_buffer(ia);
        const auto& g = t.grad_ref(self);
        const auto& x = t.value(ia);
        const auto& y = t.value(self);
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * dfdx(x[i], y[i]);
    });
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Contractions

/// a (r x k) * b (k x c)
template <class Real>
basic_var<Real> matmul(basic_var<Real> a, basic_var<Real> b) {
    detail::require_matrix("matmul", a);
    detail::require_matrix("matmul", b);
    const auto& av = a.value();
    const auto& bv = b.value();
    if (av.cols() != bv.rows())
        throw shape_error("matmul: shape mismatch " + shape_string(av.shape()) + " x " +
                          shape_string(bv.shape()));
    const std::size_t m = av.rows(), k = av.cols(), n = bv.cols();
    auto out = basic_tensor<Real>::matrix(m, n);
    kernels::gemm_nn(m, k, n, av.values().data(), bv.values().data(), out.values().data(), false);
    const std::size_t ia = a.id(), ib = b.id();
    return a.tape().record("matmul", std::move(out), {a, b},
                           [ia, ib, m, k, n](basic_tape<Real>& t, std::size_t self) {
                               const Real* g = t.grad_ref(self).values().data();
                               if (auto ga = t.grad_buffer(ia); !ga.empty())
                                   kernels::gemm_nt(m, n, k, g, t.value(ib).values().data(),
                                                    ga.data(), true);
                               if (auto gb = t.grad_buffer(ib); !gb.empty())
                                   kernels::gemm_tn(m, k, n, t.value(ia).values().data(), g,
                                                    gb.data(), true);
                           });
}

/// a (r x k) * b^T, b is (c x k)
template <class Real>
basic_var<Real> matmul_nt(basic_var<Real> a, basic_var<Real> b) {
    detail::require_matrix("matmul_nt", a);
    detail::require_matrix("matmul_nt", b);
    const auto& av = a.value();
    const auto& bv = b.value();
    if (av.cols() != bv.cols())
        throw shape_error("matmul_nt: shape mismatch " + shape_string(av.shape()) + " x " +
                          shape_string(bv.shape()) + "^T");
    const std::size_t m = av.rows(), k = av.cols(), n = bv.rows();
    auto out = basic_tensor<Real>::matrix(m, n);
    kernels::gemm_nt(m, k, n, av.values().data(), bv.values().data(), out.values().data(), false);
    const std::size_t ia = a.id(), ib = b.id();
    return a.tape().record("matmul_nt", std::move(out), {a, b},
                           [ia, ib, m, k, n](basic_tape<Real>& t, std::size_t self) {
                               const Real* g = t.grad_ref(self).values().data();
                               // dA = G B, dB = G^T A
                               if (auto ga = t.grad_buffer(ia); !ga.empty())
                                   kernels::gemm_nn(m, n, k, g, t.value(ib).values().data(),
                                                    ga.data(), true);
                               if (auto gb = t.grad_buffer(ib); !gb.empty())
                                   kernels::gemm_tn(m, n, k, g, t.value(ia).values().data(),
                                                    gb.data(), true);
                           });
}

// ---------------------------------------------------------------------------
// Elementwise and broadcast arithmetic

template <class Real>
basic_var<Real> add(basic_var<Real> a, basic_var<Real> b) {
    detail::require_same_shape("add", a, b);
    basic_tensor<Real> out = a.value();
    const auto& bv = b.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
    const std::size_t ia = a.id(), ib = b.id();
    return a.tape().record("add", std::move(out), {a, b}, [ia, ib](basic_tape<Real>& t, std::size_t self) {
        const auto& g = t.grad_ref(self);
        for (std::size_t id : {ia, ib}) {
            auto gx = t.grad_buffer(id);
            for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i];
        }
    });
}

/// Elementwise product.
template <class Real>
basic_var<Real> mul(basic_var<Real> a, basic_var<Real> b) {
    detail::require_same_shape("mul", a, b);
    basic_tensor<Real> out = a.value();
    const auto& bv = b.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
    const std::size_t ia = a.id(), ib = b.id();
    return a.tape().record("mul", std::move(out), {a, b}, [ia, ib](basic_tape<Real>& t, std::size_t self) {
        const auto& g = t.grad_ref(self);
        if (auto ga = t.grad_buffer(ia); !ga.empty()) {
            const auto& bv = t.value(ib);
            for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * bv[i];
        }
        if (auto gb = t.grad_buffer(ib); !gb.empty()) {
            const auto& av = t.value(ia);
            for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[i] * av[i];
        }
    });
}

/// Adds a row vector (size == cols) to every row of a.
template <class Real>
basic_var<Real> add_row(basic_var<Real> a, basic_var<Real> row) {
    detail::require_matrix("add_row", a);
    const std::size_t r = a.rows(), c = a.cols();
    if (row.value().size() != c)
        throw shape_error("add_row: shape mismatch " + shape_string(a.shape()) + " vs row " +
                          shape_string(row.shape()));
    basic_tensor<Real> out = a.value();
    const auto& rv = row.value();
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out(i, j) += rv[j];
    const std::size_t ia = a.id(), ib = row.id();
    return a.tape().record("add_row", std::move(out), {a, row},
                           [ia, ib, r, c](basic_tape<Real>& t, std::size_t self) {
                               const auto& g = t.grad_ref(self);
                               if (auto ga = t.grad_buffer(ia); !ga.empty())
                                   for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i];
                               if (auto gb = t.grad_buffer(ib); !gb.empty())
                                   for (std::size_t i = 0; i < r; ++i)
                                       for (std::size_t j = 0; j < c; ++j) gb[j] += g[i * c + j];
                           });
}

/// Multiplies every row of a elementwise by a row vector (size == cols).
template <class Real>
basic_var<Real> mul_row(basic_var<Real> a, basic_var<Real> row) {
    detail::require_matrix("mul_row", a);
    const std::size_t r = a.rows(), c = a.cols();
    if (row.value().size() != c)
        throw shape_error("mul_row: shape mismatch " + shape_string(a.shape()) + " vs row " +
                          shape_string(row.shape()));
    basic_tensor<Real> out = a.value();
    const auto& rv = row.value();
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out(i, j) *= rv[j];
    const std::size_t ia = a.id(), ib = row.id();
    return a.tape().record("mul_row", std::move(out), {a, row},
                           [ia, ib, r, c](basic_tape<Real>& t, std::size_t self) {
                               const auto& g = t.grad_ref(self);
                               const auto& av = t.value(ia);
                               const auto& rv = t.value(ib);
                               if (auto ga = t.grad_buffer(ia); !ga.empty())
                                   for (std::size_t i = 0; i < r; ++i)
                                       for (std::size_t j = 0; j < c; ++j)
                                           ga[i * c + j] += g[i * c + j] * rv[j];
                               if (auto gb = t.grad_buffer(ib); !gb.empty())
                                   for (std::size_t i = 0; i < r; ++i)
                                       for (std::size_t j = 0; j < c; ++j)
                                           gb[j] += g[i * c + j] * av[i * c + j];
                           });
}

template <class Real>
basic_var<Real> scale(basic_var<Real> a, Real s) {
    basic_tensor<Real> out = a.value();
    for (auto& v : out.values()) v *= s;
    const std::size_t ia = a.id();
    return a.tape().record("scale", std::move(out), {a}, [ia, s](basic_tape<Real>& t, std::size_t self) {
        auto ga = t.grad_buffer(ia);
        const auto& g = t.grad_ref(self);
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += s * g[i];
    });
}

template <class Real>
basic_var<Real> add_scalar(basic_var<Real> a, Real s) {
    basic_tensor<Real> out = a.value();
    for (auto& v : out.values()) v += s;
    const std::size_t ia = a.id();
    return a.tape().record("add_scalar", std::move(out), {a}, [ia](basic_tape<Real>& t, std::size_t self) {
        auto ga = t.grad_buffer(ia);
        const auto& g = t.grad_ref(self);
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i];
    });
}

// ---------------------------------------------------------------------------
// Structural ops

template <class Real>
basic_var<Real> concat_rows(const std::vector<basic_var<Real>>& parts) {
    if (parts.empty()) throw shape_error("concat_rows: no inputs");
    const std::size_t c = parts.front().cols();
    std::size_t r = 0;
    for (const auto& p : parts) {
        detail::require_matrix("concat_rows", p);
        if (p.cols() != c)
            throw shape_error("concat_rows: shape mismatch " + shape_string(parts.front().shape()) +
                              " vs " + shape_string(p.shape()));
        r += p.rows();
    }
    auto out = basic_tensor<Real>::matrix(r, c);
    std::vector<std::pair<std::size_t, std::size_t>> spans;  // (id, row offset)
    std::size_t off = 0;
    for (const auto& p : parts) {
        const auto& v = p.value();
        std::copy(v.values().begin(), v.values().end(), out.values().begin() + off * c);
        spans.emplace_back(p.id(), off);
        off += p.rows();
    }
    return parts.front().tape().record("concat_rows", std::move(out), parts,
                                       [spans, c](basic_tape<Real>& t, std::size_t self) {
                                           const auto& g = t.grad_ref(self);
                                           for (const auto& [id, o] : spans) {
                                               auto gx = t.grad_buffer(id);
                                               for (std::size_t i = 0; i < gx.size(); ++i)
                                                   gx[i] += g[o * c + i];
                                           }
                                       });
}

template <class Real>
basic_var<Real> concat_cols(const std::vector<basic_var<Real>>& parts) {
    if (parts.empty()) throw shape_error("concat_cols: no inputs");
    const std::size_t r = parts.front().rows();
    std::size_t c = 0;
    for (const auto& p : parts) {
        detail::require_matrix("concat_cols", p);
        if (p.rows() != r)
            throw shape_error("concat_cols: shape mismatch " + shape_string(parts.front().shape()) +
                              " vs " + shape_string(p.shape()));
        c += p.cols();
    }
    auto out = basic_tensor<Real>::matrix(r, c);
    std::vector<std::tuple<std::size_t, std::size_t, std::size_t>> spans;  // (id, col offset, width)
    std::size_t off = 0;
    for (const auto& p : parts) {
        const auto& v = p.value();
        const std::size_t w = p.cols();
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < w; ++j) out(i, off + j) = v[i * w + j];
        spans.emplace_back(p.id(), off, w);
        off += w;
    }
    return parts.front().tape().record("concat_cols", std::move(out), parts,
                                       [spans, r, c](basic_tape<Real>& t, std::size_t self) {
                                           const auto& g = t.grad_ref(self);
                                           for (const auto& [id, o, w] : spans) {
                                               auto gx = t.grad_buffer(id);
                                               if (gx.empty()) continue;
                                               for (std::size_t i = 0; i < r; ++i)
                                                   for (std::size_t j = 0; j < w; ++j)
                                                       gx[i * w + j] += g[i * c + o + j];
                                           }
                                       });
}

template <class Real>
basic_var<Real> slice_rows(basic_var<Real> a, std::size_t begin, std::size_t count) {
    detail::require_matrix("slice_rows", a);
    const std::size_t c = a.cols();
    if (begin + count > a.rows())
        throw shape_error("slice_rows: rows [" + std::to_string(begin) + ", " +
                          std::to_string(begin + count) + ") out of " + shape_string(a.shape()));
    const auto& v = a.value();
    basic_tensor<Real> out({count, c},
                           std::vector<Real>(v.values().begin() + begin * c,
                                             v.values().begin() + (begin + count) * c));
    const std::size_t ia = a.id();
    return a.tape().record("slice_rows", std::move(out), {a},
                           [ia, begin, c](basic_tape<Real>& t, std::size_t self) {
                               auto ga = t.grad_buffer(ia);
                               const auto& g = t.grad_ref(self);
                               for (std::size_t i = 0; i < g.size(); ++i) ga[begin * c + i] += g[i];
                           });
}

template <class Real>
basic_var<Real> slice_cols(basic_var<Real> a, std::size_t begin, std::size_t count) {
    detail::require_matrix("slice_cols", a);
    const std::size_t r = a.rows(), c = a.cols();
    if (begin + count > c)
        throw shape_error("slice_cols: cols [" + std::to_string(begin) + ", " +
                          std::to_string(begin + count) + ") out of " + shape_string(a.shape()));
    const auto& v = a.value();
    auto out = basic_tensor<Real>::matrix(r, count);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < count; ++j) out(i, j) = v[i * c + begin + j];
    const std::size_t ia = a.id();
    return a.tape().record("slice_cols", std::move(out), {a},
                           [ia, begin, count, r, c](basic_tape<Real>& t, std::size_t self) {
                               auto ga = t.grad_buffer(ia);
                               const auto& g = t.grad_ref(self);
                               for (std::size_t i = 0; i < r; ++i)
                                   for (std::size_t j = 0; j < count; ++j)
                                       ga[i * c + begin + j] += g[i * count + j];
                           });
}

/// Rows of `table` selected by `ids`; backward scatter-adds into the table.
template <class Real>
basic_var<Real> gather_rows(basic_var<Real> table, std::span<const int> ids) {
    detail::require_matrix("gather_rows", table);
    const std::size_t n = table.rows(), c = table.cols();
    const auto& v = table.value();
    auto out = basic_tensor<Real>::matrix(ids.size(), c);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= n)
            throw shape_error("gather_rows: id " + std::to_string(ids[i]) + " out of table " +
                              shape_string(table.shape()));
        std::copy_n(v.values().begin() + ids[i] * c, c, out.values().begin() + i * c);
    }
    const std::size_t it = table.id();
    std::vector<int> idx(ids.begin(), ids.end());
    return table.tape().record("gather_rows", std::move(out), {table},
                               [it, idx = std::move(idx), c](basic_tape<Real>& t, std::size_t self) {
                                   auto gt = t.grad_buffer(it);
                                   const auto& g = t.grad_ref(self);
                                   for (std::size_t i = 0; i < idx.size(); ++i)
                                       for (std::size_t j = 0; j < c; ++j)
                                           gt[idx[i] * c + j] += g[i * c + j];
                               });
}

// ---------------------------------------------------------------------------
// Nonlinearities

template <class Real>
basic_var<Real> relu(basic_var<Real> a) {
    return detail::unary<Real>(
        "relu", a, [](Real x) { return x > Real{0} ? x : Real{0}; },
        [](Real x, Real) { return x > Real{0} ? Real{1} : Real{0}; });
}

template <class Real>
basic_var<Real> sigmoid(basic_var<Real> a) {
    return detail::unary<Real>(
        "sigmoid", a,
        [](Real x) {
            if (x >= Real{0}) return Real{1} / (Real{1} + std::exp(-x));
            const Real e = std::exp(x);
            return e / (Real{1} + e);
        },
        [](Real, Real y) { return y * (Real{1} - y); });
}

template <class Real>
basic_var<Real> square(basic_var<Real> a) {
    return detail::unary<Real>(
        "square", a, [](Real x) { return x * x; }, [](Real x, Real) { return Real{2} * x; });
}

template <class Real>
basic_var<Real> log(basic_var<Real> a) {
    for (Real x : a.value().values())
        if (!(x > Real{0})) throw domain_error("log: non-positive argument " + std::to_string(x));
    return detail::unary<Real>(
        "log", a, [](Real x) { return std::log(x); }, [](Real x, Real) { return Real{1} / x; });
}

namespace detail {

template <class Real>
void softmax_row(std::span<const Real> x, std::span<Real> y, const attention_mask* mask, std::size_t r) {
    Real mx = -std::numeric_limits<Real>::infinity();
    for (std::size_t j = 0; j < x.size(); ++j)
        if (!mask || (*mask)(r, j)) mx = std::max(mx, x[j]);
    if (mx == -std::numeric_limits<Real>::infinity())
        throw domain_error("softmax: row " + std::to_string(r) + " is fully masked");
    Real s{0};
    for (std::size_t j = 0; j < x.size(); ++j) {
        y[j] = (!mask || (*mask)(r, j)) ? std::exp(x[j] - mx) : Real{0};
        s += y[j];
    }
    for (auto& v : y) v /= s;
}

}  // namespace detail

/// Row-wise softmax; entries where `mask` is false get probability 0.
template <class Real>
basic_var<Real> softmax_rows(basic_var<Real> a, const attention_mask* mask = nullptr) {
    detail::require_matrix("softmax_rows", a);
    const std::size_t r = a.rows(), c = a.cols();
    if (mask && (mask->rows != r || mask->cols != c))
        throw shape_error("softmax_rows: mask shape [" + std::to_string(mask->rows) + ", " +
                          std::to_string(mask->cols) + "] vs " + shape_string(a.shape()));
    const auto& x = a.value();
    basic_tensor<Real> out(x.shape());
    for (std::size_t i = 0; i < r; ++i) detail::softmax_row<Real>(x.row(i), out.row(i), mask, i);
    const std::size_t ia = a.id();
    return a.tape().record("softmax_rows", std::move(out), {a},
                           [ia, r, c](basic_tape<Real>& t, std::size_t self) {
                               auto ga = t.grad_buffer(ia);
                               const auto& g = t.grad_ref(self);
                               const auto& y = t.value(self);
                               for (std::size_t i = 0; i < r; ++i) {
                                   Real dot{0};
                                   for (std::size_t j = 0; j < c; ++j) dot += g[i * c + j] * y[i * c + j];
                                   for (std::size_t j = 0; j < c; ++j)
                                       ga[i * c + j] += y[i * c + j] * (g[i * c + j] - dot);
                               }
                           });
}

/// Row-wise normalisation to zero mean and unit variance (no affine part).
/// Population variance; `eps` is added inside the square root.
template <class Real>
basic_var<Real> layer_norm_rows(basic_var<Real> a, Real eps = Real(1e-5)) {
    detail::require_matrix("layer_norm_rows", a);
    const std::size_t r = a.rows(), c = a.cols();
    const auto& x = a.value();
    basic_tensor<Real> out(x.shape());
    std::vector<Real> inv_std(r);
    for (std::size_t i = 0; i < r; ++i) {
        Real mean{0};
        for (std::size_t j = 0; j < c; ++j) mean += x(i, j);
        mean /= Real(c);
        Real var{0};
        for (std::size_t j = 0; j < c; ++j) var += (x(i, j) - mean) * (x(i, j) - mean);
        var /= Real(c);
        const Real denom = std::sqrt(var + eps);
        if (!(denom > Real{0})) throw domain_error("layer_norm_rows: zero variance with eps = 0");
        inv_std[i] = Real{1} / denom;
        for (std::size_t j = 0; j < c; ++j) out(i, j) = (x(i, j) - mean) * inv_std[i];
    }
    const std::size_t ia = a.id();
    return a.tape().record("layer_norm_rows", std::move(out), {a},
                           [ia, r, c, inv_std = std::move(inv_std)](basic_tape<Real>& t, std::size_t self) {
                               auto ga = t.grad_buffer(ia);
                               const auto& g = t.grad_ref(self);
                               const auto& y = t.value(self);
                               for (std::size_t i = 0; i < r; ++i) {
                                   Real mg{0}, mgy{0};
                                   for (std::size_t j = 0; j < c; ++j) {
                                       mg += g[i * c + j];
                                       mgy += g[i * c + j] * y[i * c + j];
                                   }
                                   mg /= Real(c);
                                   mgy /= Real(c);
                                   for (std::size_t j = 0; j < c; ++j)
                                       ga[i * c + j] +=
                                           inv_std[i] * (g[i * c + j] - mg - y[i * c + j] * mgy);
                               }
                           });
}

// ---------------------------------------------------------------------------
// Reductions and losses

template <class Real>
basic_var<Real> sum(basic_var<Real> a) {
    Real s{0};
    for (Real v : a.value().values()) s += v;
    const std::size_t ia = a.id();
    return a.tape().record("sum", basic_tensor<Real>::scalar(s), {a}, [ia](basic_tape<Real>& t, std::size_t self) {
        auto ga = t.grad_buffer(ia);
        const Real g = t.grad_ref(self)[0];
        for (auto& v : ga) v += g;
    });
}

template <class Real>
basic_var<Real> mean(basic_var<Real> a) {
    const std::size_t n = a.value().size();
    if (n == 0) throw shape_error("mean: empty tensor");
    Real s{0};
    for (Real v : a.value().values()) s += v;
    const std::size_t ia = a.id();
    return a.tape().record("mean", basic_tensor<Real>::scalar(s / Real(n)), {a},
                           [ia, n](basic_tape<Real>& t, std::size_t self) {
                               auto ga = t.grad_buffer(ia);
                               const Real g = t.grad_ref(self)[0] / Real(n);
                               for (auto& v : ga) v += g;
                           });
}

/// Mean over (row, col) picks of -log softmax(logits[row])[col]; log-softmax
/// is fused with the gather so no probability is ever logged directly.
template <class Real>
basic_var<Real> nll_pick(basic_var<Real> logits, std::span<const std::size_t> rows,
                         std::span<const int> targets) {
    detail::require_matrix("nll_pick", logits);
    if (rows.size() != targets.size())
        throw shape_error("nll_pick: " + std::to_string(rows.size()) + " rows vs " +
                          std::to_string(targets.size()) + " targets");
    if (rows.empty()) throw shape_error("nll_pick: no targets");
    const std::size_t r = logits.rows(), c = logits.cols();
    const auto& x = logits.value();
    std::vector<Real> lse(r, Real{0});
    for (std::size_t i = 0; i < r; ++i) {
        Real mx = -std::numeric_limits<Real>::infinity();
        for (std::size_t j = 0; j < c; ++j) mx = std::max(mx, x(i, j));
        Real s{0};
        for (std::size_t j = 0; j < c; ++j) s += std::exp(x(i, j) - mx);
        lse[i] = mx + std::log(s);
    }
    Real total{0};
    for (std::size_t p = 0; p < rows.size(); ++p) {
        if (rows[p] >= r || targets[p] < 0 || static_cast<std::size_t>(targets[p]) >= c)
            throw shape_error("nll_pick: pick (" + std::to_string(rows[p]) + ", " +
                              std::to_string(targets[p]) + ") out of " + shape_string(logits.shape()));
        total += lse[rows[p]] - x(rows[p], targets[p]);
    }
    const Real n = Real(rows.size());
    const std::size_t il = logits.id();
    std::vector<std::size_t> rv(rows.begin(), rows.end());
    std::vector<int> tv(targets.begin(), targets.end());
    return logits.tape().record(
        "nll_pick", basic_tensor<Real>::scalar(total / n), {logits},
        [il, c, n, rv = std::move(rv), tv = std::move(tv), lse = std::move(lse)](basic_tape<Real>& t,
                                                                                 std::size_t self) {
            auto gl = t.grad_buffer(il);
            const Real g = t.grad_ref(self)[0] / n;
            const auto& x = t.value(il);
            for (std::size_t p = 0; p < rv.size(); ++p) {
                const std::size_t i = rv[p];
                for (std::size_t j = 0; j < c; ++j) gl[i * c + j] += g * std::exp(x[i * c + j] - lse[i]);
                gl[i * c + tv[p]] -= g;
            }
        });
}

/// Inverted dropout with a pre-drawn keep mask (1 keep / 0 drop).
template <class Real>
basic_var<Real> dropout(basic_var<Real> a, const std::vector<unsigned char>& keep, Real rate) {
    if (keep.size() != a.value().size())
        throw shape_error("dropout: mask size " + std::to_string(keep.size()) + " vs " +
                          shape_string(a.shape()));
    const Real s = Real{1} / (Real{1} - rate);
    basic_tensor<Real> m(a.shape());
    for (std::size_t i = 0; i < keep.size(); ++i) m[i] = keep[i] ? s : Real{0};
    return mul(a, a.tape().constant(std::move(m)));
}

}  // namespace dexr
