#pragma once
#include <cstddef>
#include <string>
#include <vector>

#include "paresis/common.hpp"

namespace paresis::nd {

// Dense row-major real tensor. Constructors keep v.size() == product(shape);
// code that writes v directly must preserve that.
struct Tensor {
    std::vector<size_t> shape;
    std::vector<double> v;

    Tensor() = default;
    explicit Tensor(std::vector<size_t> s);
    Tensor(std::vector<size_t> s, std::vector<double> values);

    static Tensor zeros(std::vector<size_t> s) { return Tensor(std::move(s)); }
    static Tensor full(std::vector<size_t> s, double value);

    size_t ndim() const { return shape.size(); }
    size_t dim(size_t i) const { return shape[i]; }
    size_t numel() const { return v.size(); }

    double* data() { return v.data(); }
    const double* data() const { return v.data(); }

    double& operator()(size_t i) { return v[i]; }
    double operator()(size_t i) const { return v[i]; }
    double& operator()(size_t i, size_t j) { return v[i * shape[1] + j]; }
    double operator()(size_t i, size_t j) const { return v[i * shape[1] + j]; }
    double& operator()(size_t i, size_t j, size_t k) {
        return v[(i * shape[1] + j) * shape[2] + k];
    }
    double operator()(size_t i, size_t j, size_t k) const {
        return v[(i * shape[1] + j) * shape[2] + k];
    }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }
    void fill(double x) { std::fill(v.begin(), v.end(), x); }
    std::string shape_str() const;

    // throws Error at the first non-finite entry; `what` names the producing op
    void check_finite(const char* what) const;
};

size_t shape_product(const std::vector<size_t>& s);
std::string shape_to_string(const std::vector<size_t>& s);

// C (MxN) = or += op(A) * op(B); transposed operands are stored KxM / NxK.
// ta && tb is not supported.
void gemm(bool ta, bool tb, size_t m, size_t n, size_t k, const double* a, const double* b,
          double* c, bool accumulate);

// convenience wrappers with shape checks
Tensor matmul(const Tensor& a, const Tensor& b);

} // namespace paresis::nd
