#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include "dexr/error.hpp"

namespace dexr {

/// Dense row-major array. Rank 0 is a scalar, rank 1 a row vector, rank 2 a
/// matrix. Every tape operation works on the matrix view (rows x cols).
template <class Real>
class basic_tensor {
public:
    using value_type = Real;
    using shape_type = std::vector<std::size_t>;

    basic_tensor() = default;

    explicit basic_tensor(shape_type shape, Real fill = Real{0})
        : shape_(std::move(shape)), data_(element_count(shape_), fill) {}

    basic_tensor(shape_type shape, std::vector<Real> values)
        : shape_(std::move(shape)), data_(std::move(values)) {
        if (element_count(shape_) != data_.size())
            throw shape_error("tensor: shape " + shape_string(shape_) + " holds " +
                              std::to_string(element_count(shape_)) + " values, got " +
                              std::to_string(data_.size()));
    }

    static basic_tensor scalar(Real v) { return basic_tensor(shape_type{}, std::vector<Real>{v}); }

    static basic_tensor matrix(std::size_t rows, std::size_t cols, Real fill = Real{0}) {
        return basic_tensor(shape_type{rows, cols}, fill);
    }

    static basic_tensor row_vector(std::vector<Real> values) {
        const std::size_t n = values.size();
        return basic_tensor(shape_type{1, n}, std::move(values));
    }

    static basic_tensor from_rows(std::initializer_list<std::initializer_list<Real>> rows) {
        const std::size_t r = rows.size();
        const std::size_t c = r ? rows.begin()->size() : 0;
        std::vector<Real> values;
        values.reserve(r * c);
        for (const auto& row : rows) {
            if (row.size() != c) throw shape_error("tensor::from_rows: ragged rows");
            values.insert(values.end(), row.begin(), row.end());
        }
        return basic_tensor(shape_type{r, c}, std::move(values));
    }

    const shape_type& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }
    bool is_scalar() const noexcept { return data_.size() == 1; }

    std::size_t rows() const noexcept { return shape_.size() == 2 ? shape_[0] : 1; }
    std::size_t cols() const noexcept {
        if (shape_.empty()) return 1;
        return shape_.size() == 2 ? shape_[1] : shape_[0];
    }

    Real& operator[](std::size_t i) { return data_[i]; }
    const Real& operator[](std::size_t i) const { return data_[i]; }
    Real& operator()(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
    const Real& operator()(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

    Real item() const {
        if (!is_scalar()) throw shape_error("tensor::item on shape " + shape_string(shape_));
        return data_[0];
    }

    std::span<Real> values() noexcept { return data_; }
    std::span<const Real> values() const noexcept { return data_; }
    std::span<Real> row(std::size_t r) { return {data_.data() + r * cols(), cols()}; }
    std::span<const Real> row(std::size_t r) const { return {data_.data() + r * cols(), cols()}; }

    std::vector<Real>& storage() noexcept { return data_; }
    const std::vector<Real>& storage() const noexcept { return data_; }

    void fill(Real v) { std::fill(data_.begin(), data_.end(), v); }

    bool all_finite() const {
        return std::all_of(data_.begin(), data_.end(), [](Real v) { return std::isfinite(v); });
    }

    friend bool operator==(const basic_tensor&, const basic_tensor&) = default;

    static std::size_t element_count(const shape_type& shape) {
        return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
    }

private:
    shape_type shape_;
    std::vector<Real> data_;
};

using tensor = basic_tensor<double>;

namespace kernels {

// C (m x n) (+)= A (m x k) * B (k x n)
template <class Real>
void gemm_nn(std::size_t m, std::size_t k, std::size_t n, const Real* a, const Real* b, Real* c,
             bool accumulate) {
    if (!accumulate) std::fill(c, c + m * n, Real{0});
    for (std::size_t i = 0; i < m; ++i) {
        Real* crow = c + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const Real aip = a[i * k + p];
            if (aip == Real{0}) continue;
            const Real* brow = b + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
        }
    }
}

// C (m x n) (+)= A (m x k) * B^T, B is (n x k). B is transposed into a
// scratch buffer so the inner loop runs over contiguous memory.
template <class Real>
void gemm_nt(std::size_t m, std::size_t k, std::size_t n, const Real* a, const Real* b, Real* c,
             bool accumulate) {
    thread_local std::vector<Real> bt;
    bt.resize(k * n);
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t p = 0; p < k; ++p) bt[p * n + j] = b[j * k + p];
    gemm_nn(m, k, n, a, bt.data(), c, accumulate);
}

// C (k x n) (+)= A^T * B, A is (m x k), B is (m x n)
template <class Real>
void gemm_tn(std::size_t m, std::size_t k, std::size_t n, const Real* a, const Real* b, Real* c,
             bool accumulate) {
    if (!accumulate) std::fill(c, c + k * n, Real{0});
    for (std::size_t i = 0; i < m; ++i) {
        const Real* brow = b + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const Real api = a[i * k + p];
            if (api == Real{0}) continue;
            Real* crow = c + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += api * brow[j];
        }
    }
}

}  // namespace kernels

/// Plain (untaped) matrix product, used by tests and inference helpers.
template <class Real>
basic_tensor<Real> matmul(const basic_tensor<Real>& a, const basic_tensor<Real>& b) {
    if (a.cols() != b.rows())
        throw shape_error("matmul: " + shape_string(a.shape()) + " x " + shape_string(b.shape()));
    auto out = basic_tensor<Real>::matrix(a.rows(), b.cols());
    kernels::gemm_nn(a.rows(), a.cols(), b.cols(), a.values().data(), b.values().data(),
                     out.values().data(), false);
    return out;
}

}  // namespace dexr
