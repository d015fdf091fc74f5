#ifndef ACVAE_TENSOR_HPP
#define ACVAE_TENSOR_HPP

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace acvae {

class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Dense row-major 2-D array of doubles. Rows are batch items.
class Tensor {
public:
    Tensor() = default;
    Tensor(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::span<double> values() { return data_; }
    std::span<const double> values() const { return data_; }

    double* row(std::size_t i) { return data_.data() + i * cols_; }
    const double* row(std::size_t i) const { return data_.data() + i * cols_; }

    bool same_shape(const Tensor& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

    std::string shape_str() const;

    bool all_finite() const;

    Tensor& operator+=(const Tensor& other);
    Tensor& operator*=(double s);

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// c = a * b. Throws ShapeError naming both shapes on mismatch.
Tensor matmul(const Tensor& a, const Tensor& b);

// c = a^T * b (a is rows x m, result m x b.cols). Used for weight gradients.
Tensor matmul_transpose_a(const Tensor& a, const Tensor& b);

// c = a * b^T. Used for input gradients.
Tensor matmul_transpose_b(const Tensor& a, const Tensor& b);

// Horizontal concatenation of two tensors with equal row counts.
Tensor hconcat(const Tensor& a, const Tensor& b);

// Column slice [begin, begin+width).
Tensor hslice(const Tensor& t, std::size_t begin, std::size_t width);

} // namespace acvae

#endif
