#include "acvae/tensor.hpp"

#include <cmath>

namespace acvae {

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    Tensor t(rows.size(), rows.size() ? rows.begin()->size() : 0);
    std::size_t i = 0;
    for (const auto& r : rows) {
        if (r.size() != t.cols_)
            throw ShapeError("from_rows: ragged row " + std::to_string(i));
        std::size_t j = 0;
        for (double v : r) t(i, j++) = v;
        ++i;
    }
    return t;
}

std::string Tensor::shape_str() const {
    return "(" + std::to_string(rows_) + "x" + std::to_string(cols_) + ")";
}

bool Tensor::all_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

Tensor& Tensor::operator+=(const Tensor& other) {
    if (!same_shape(other))
        throw ShapeError("add: shape mismatch " + shape_str() + " vs " + other.shape_str());
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
}

Tensor& Tensor::operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.cols() != b.rows())
        throw ShapeError("matmul: inner dimensions differ, " + a.shape_str() + " x " +
                         b.shape_str());
    Tensor c(a.rows(), b.cols());
    // ikj order keeps the inner loop contiguous over both b and c rows.
    // Blocks of 4 output rows share each streamed row of b (4x less b
    // traffic), and unrolling k by 2 amortizes the c-row load/store.
    const std::size_t n = b.cols(), kk = a.cols(), rows = a.rows();
    std::size_t i = 0;
    for (; i + 4 <= rows; i += 4) {
        const double* __restrict a0 = a.row(i);
        const double* __restrict a1 = a.row(i + 1);
        const double* __restrict a2 = a.row(i + 2);
        const double* __restrict a3 = a.row(i + 3);
        double* __restrict c0 = c.row(i);
        double* __restrict c1 = c.row(i + 1);
        double* __restrict c2 = c.row(i + 2);
        double* __restrict c3 = c.row(i + 3);
        std::size_t k = 0;
        for (; k + 4 <= kk; k += 4) {
            const double* __restrict b0 = b.row(k);
            const double* __restrict b1 = b.row(k + 1);
            const double* __restrict b2 = b.row(k + 2);
            const double* __restrict b3 = b.row(k + 3);
            const double v00 = a0[k], v01 = a0[k + 1], v02 = a0[k + 2], v03 = a0[k + 3];
            const double v10 = a1[k], v11 = a1[k + 1], v12 = a1[k + 2], v13 = a1[k + 3];
            const double v20 = a2[k], v21 = a2[k + 1], v22 = a2[k + 2], v23 = a2[k + 3];
            const double v30 = a3[k], v31 = a3[k + 1], v32 = a3[k + 2], v33 = a3[k + 3];
            for (std::size_t j = 0; j < n; ++j) {
                const double w0 = b0[j], w1 = b1[j], w2 = b2[j], w3 = b3[j];
                c0[j] += v00 * w0 + v01 * w1 + v02 * w2 + v03 * w3;
                c1[j] += v10 * w0 + v11 * w1 + v12 * w2 + v13 * w3;
                c2[j] += v20 * w0 + v21 * w1 + v22 * w2 + v23 * w3;
                c3[j] += v30 * w0 + v31 * w1 + v32 * w2 + v33 * w3;
            }
        }
        for (; k < kk; ++k) {
            const double* __restrict brow = b.row(k);
            const double v0 = a0[k], v1 = a1[k], v2 = a2[k], v3 = a3[k];
            for (std::size_t j = 0; j < n; ++j) {
                const double w = brow[j];
                c0[j] += v0 * w;
                c1[j] += v1 * w;
                c2[j] += v2 * w;
                c3[j] += v3 * w;
            }
        }
    }
    for (; i < rows; ++i) {
        const double* __restrict arow = a.row(i);
        double* __restrict crow = c.row(i);
        std::size_t k = 0;
        for (; k + 2 <= kk; k += 2) {
            const double v0 = arow[k], v1 = arow[k + 1];
            const double* __restrict b0 = b.row(k);
            const double* __restrict b1 = b.row(k + 1);
            for (std::size_t j = 0; j < n; ++j) crow[j] += v0 * b0[j] + v1 * b1[j];
        }
        for (; k < kk; ++k) {
            const double aik = arow[k];
            const double* __restrict brow = b.row(k);
            for (std::size_t j = 0; j < n; ++j) crow[j] += aik * brow[j];
        }
    }
    return c;
}

Tensor matmul_transpose_a(const Tensor& a, const Tensor& b) {
    if (a.rows() != b.rows())
        throw ShapeError("matmul_transpose_a: row counts differ, " + a.shape_str() + " x " +
                         b.shape_str());
    Tensor c(a.cols(), b.cols());
    const std::size_t n = b.cols(), m = a.rows();
    for (std::size_t i = 0; i < a.cols(); ++i) {
        double* __restrict crow = c.row(i);
        std::size_t k = 0;
        for (; k + 4 <= m; k += 4) {
            const double a0 = a(k, i), a1 = a(k + 1, i), a2 = a(k + 2, i), a3 = a(k + 3, i);
            const double* __restrict b0 = b.row(k);
            const double* __restrict b1 = b.row(k + 1);
            const double* __restrict b2 = b.row(k + 2);
            const double* __restrict b3 = b.row(k + 3);
            for (std::size_t j = 0; j < n; ++j)
                crow[j] += a0 * b0[j] + a1 * b1[j] + a2 * b2[j] + a3 * b3[j];
        }
        for (; k < m; ++k) {
            const double aki = a(k, i);
            const double* __restrict brow = b.row(k);
            for (std::size_t j = 0; j < n; ++j) crow[j] += aki * brow[j];
        }
    }
    return c;
}

Tensor matmul_transpose_b(const Tensor& a, const Tensor& b) {
    if (a.cols() != b.cols())
        throw ShapeError("matmul_transpose_b: column counts differ, " + a.shape_str() + " x " +
                         b.shape_str());
    // Transposing b once lets the accumulation reuse the row-blocked matmul
    // kernel, which is much faster than strided dot products here.
    Tensor bt(b.cols(), b.rows());
    for (std::size_t i = 0; i < b.rows(); ++i) {
        const double* __restrict brow = b.row(i);
        for (std::size_t j = 0; j < b.cols(); ++j) bt(j, i) = brow[j];
    }
    return matmul(a, bt);
}

Tensor hconcat(const Tensor& a, const Tensor& b) {
    if (a.rows() != b.rows())
        throw ShapeError("hconcat: row counts differ, " + a.shape_str() + " vs " + b.shape_str());
    Tensor c(a.rows(), a.cols() + b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double* crow = c.row(i);
        const double* arow = a.row(i);
        const double* brow = b.row(i);
        for (std::size_t j = 0; j < a.cols(); ++j) crow[j] = arow[j];
        for (std::size_t j = 0; j < b.cols(); ++j) crow[a.cols() + j] = brow[j];
    }
    return c;
}

Tensor hslice(const Tensor& t, std::size_t begin, std::size_t width) {
    if (begin + width > t.cols())
        throw ShapeError("hslice: [" + std::to_string(begin) + ", " +
                         std::to_string(begin + width) + ") out of " + t.shape_str());
    Tensor c(t.rows(), width);
    for (std::size_t i = 0; i < t.rows(); ++i) {
        const double* trow = t.row(i) + begin;
        double* crow = c.row(i);
        for (std::size_t j = 0; j < width; ++j) crow[j] = trow[j];
    }
    return c;
}

} // namespace acvae
