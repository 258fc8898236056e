#include "paresis/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

namespace paresis::nd {

size_t shape_product(const std::vector<size_t>& s) {
    size_t n = 1;
    for (size_t d : s) n *= d;
    return n;
}

std::string shape_to_string(const std::vector<size_t>& s) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << "]";
    return os.str();
}

Tensor::Tensor(std::vector<size_t> s) : shape(std::move(s)), v(shape_product(shape), 0.0) {
    for (size_t d : shape)
        if (d == 0) throw ContractError("tensor dimension must be positive, got shape " + shape_str());
}

Tensor::Tensor(std::vector<size_t> s, std::vector<double> values)
    : shape(std::move(s)), v(std::move(values)) {
    if (v.size() != shape_product(shape))
        throw ContractError("tensor value count " + std::to_string(v.size()) +
                            " does not match shape " + shape_str());
}

Tensor Tensor::full(std::vector<size_t> s, double value) {
    Tensor t(std::move(s));
    t.fill(value);
    return t;
}

std::string Tensor::shape_str() const { return shape_to_string(shape); }

void Tensor::check_finite(const char* what) const {
    for (size_t i = 0; i < v.size(); ++i) {
        if (!std::isfinite(v[i]))
            throw Error(std::string(what) + ": non-finite value at flat index " + std::to_string(i));
    }
}

void gemm(bool ta, bool tb, size_t m, size_t n, size_t k, const double* a, const double* b,
          double* c, bool accumulate) {
    if (ta && tb) throw ContractError("gemm: ta && tb unsupported");
    if (!accumulate) std::memset(c, 0, m * n * sizeof(double));
    // every path accumulates each C element in ascending-p order, so the
    // result is independent of the unroll factor
    if (!tb) {
        // row-major accumulation: C[i,:] += A(i,p) * B[p,:]; A(i,p) reads
        // a[i*k+p] in the plain case and a[p*m+i] in the transposed case.
        // 4x4 tiles let four C rows share one pass over four B rows.
        const auto at = [&](size_t i, size_t p) { return ta ? a[p * m + i] : a[i * k + p]; };
        size_t i = 0;
        for (; i + 4 <= m; i += 4) {
            double* __restrict c0 = c + i * n;
            double* __restrict c1 = c0 + n;
            double* __restrict c2 = c1 + n;
            double* __restrict c3 = c2 + n;
            size_t p = 0;
            for (; p + 4 <= k; p += 4) {
                const double a00 = at(i, p), a01 = at(i, p + 1), a02 = at(i, p + 2),
                             a03 = at(i, p + 3);
                const double a10 = at(i + 1, p), a11 = at(i + 1, p + 1), a12 = at(i + 1, p + 2),
                             a13 = at(i + 1, p + 3);
                const double a20 = at(i + 2, p), a21 = at(i + 2, p + 1), a22 = at(i + 2, p + 2),
                             a23 = at(i + 2, p + 3);
                const double a30 = at(i + 3, p), a31 = at(i + 3, p + 1), a32 = at(i + 3, p + 2),
                             a33 = at(i + 3, p + 3);
                const double* __restrict b0 = b + p * n;
                const double* __restrict b1 = b0 + n;
                const double* __restrict b2 = b1 + n;
                const double* __restrict b3 = b2 + n;
                for (size_t j = 0; j < n; ++j) {
                    const double v0 = b0[j], v1 = b1[j], v2 = b2[j], v3 = b3[j];
                    c0[j] += a00 * v0 + a01 * v1 + a02 * v2 + a03 * v3;
                    c1[j] += a10 * v0 + a11 * v1 + a12 * v2 + a13 * v3;
                    c2[j] += a20 * v0 + a21 * v1 + a22 * v2 + a23 * v3;
                    c3[j] += a30 * v0 + a31 * v1 + a32 * v2 + a33 * v3;
                }
            }
            for (; p < k; ++p) {
                const double* __restrict brow = b + p * n;
                const double a0 = at(i, p), a1 = at(i + 1, p), a2 = at(i + 2, p),
                             a3 = at(i + 3, p);
                for (size_t j = 0; j < n; ++j) {
                    const double v = brow[j];
                    c0[j] += a0 * v;
                    c1[j] += a1 * v;
                    c2[j] += a2 * v;
                    c3[j] += a3 * v;
                }
            }
        }
        for (; i < m; ++i) {
            double* __restrict crow = c + i * n;
            size_t p = 0;
            for (; p + 4 <= k; p += 4) {
                const double a0 = at(i, p), a1 = at(i, p + 1), a2 = at(i, p + 2),
                             a3 = at(i, p + 3);
                const double* __restrict b0 = b + p * n;
                const double* __restrict b1 = b0 + n;
                const double* __restrict b2 = b1 + n;
                const double* __restrict b3 = b2 + n;
                for (size_t j = 0; j < n; ++j)
                    crow[j] += a0 * b0[j] + a1 * b1[j] + a2 * b2[j] + a3 * b3[j];
            }
            for (; p < k; ++p) {
                const double av = at(i, p);
                const double* __restrict brow = b + p * n;
                for (size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
            }
        }
    } else {
        // B stored [n,k]; C[i,j] += dot(A[i,:], B[j,:]), four dots per A pass
        for (size_t i = 0; i < m; ++i) {
            const double* __restrict arow = a + i * k;
            double* __restrict crow = c + i * n;
            size_t j = 0;
            for (; j + 4 <= n; j += 4) {
                const double* __restrict b0 = b + j * k;
                const double* __restrict b1 = b0 + k;
                const double* __restrict b2 = b1 + k;
                const double* __restrict b3 = b2 + k;
                double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
                for (size_t p = 0; p < k; ++p) {
                    const double av = arow[p];
                    s0 += av * b0[p];
                    s1 += av * b1[p];
                    s2 += av * b2[p];
                    s3 += av * b3[p];
                }
                crow[j] += s0;
                crow[j + 1] += s1;
                crow[j + 2] += s2;
                crow[j + 3] += s3;
            }
            for (; j < n; ++j) {
                const double* __restrict brow = b + j * k;
                double acc = 0.0;
                for (size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
                crow[j] += acc;
            }
        }
    }
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(0))
        throw ContractError("matmul: incompatible shapes " + a.shape_str() + " x " + b.shape_str());
    Tensor c({a.dim(0), b.dim(1)});
    gemm(false, false, a.dim(0), b.dim(1), a.dim(1), a.data(), b.data(), c.data(), false);
    return c;
}

} // namespace paresis::nd
