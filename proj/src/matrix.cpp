#include "arcrec/matrix.hpp"

#include "arcrec/kernels.hpp"

#include <cmath>

namespace arcrec {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
        throw NumericError("matrix data length " + std::to_string(data_.size()) +
                           " does not match " + std::to_string(rows_) + "x" + std::to_string(cols_));
    }
}

Matrix Matrix::column(std::span<const double> values) {
    return Matrix(values.size(), 1, std::vector<double>(values.begin(), values.end()));
}

Matrix Matrix::row(std::span<const double> values) {
    return Matrix(1, values.size(), std::vector<double>(values.begin(), values.end()));
}

Matrix Matrix::column(std::initializer_list<double> values) {
    return Matrix(values.size(), 1, std::vector<double>(values));
}

Matrix Matrix::row(std::initializer_list<double> values) {
    return Matrix(1, values.size(), std::vector<double>(values));
}

void Matrix::fill(double v) {
    std::fill(data_.begin(), data_.end(), v);
}

Matrix Matrix::transposed() const {
    Matrix t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
        for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
    return t;
}

double Matrix::scalar_value() const {
    if (rows_ != 1 || cols_ != 1) throw NumericError("expected 1x1 matrix, got " + shape_string(*this));
    return data_[0];
}

bool Matrix::all_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

double Matrix::squared_norm() const {
    double s = 0.0;
    for (double v : data_) s += v * v;
    return s;
}

Matrix& Matrix::operator+=(const Matrix& o) {
    require_same_shape(*this, o, "+=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
}

Matrix& Matrix::operator-=(const Matrix& o) {
    require_same_shape(*this, o, "-=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
    return *this;
}

Matrix& Matrix::operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
}

Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
Matrix operator*(Matrix a, double s) { return a *= s; }

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows())
        throw NumericError("matmul shape mismatch: " + shape_string(a) + " * " + shape_string(b));
    Matrix c(a.rows(), b.cols());
    kernels::gemm_accumulate(a.rows(), a.cols(), b.cols(), a.data(), b.data(), c.data());
    return c;
}

std::string shape_string(const Matrix& m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
    if (!a.same_shape(b))
        throw NumericError(std::string(what) + ": shape mismatch " + shape_string(a) + " vs " +
                           shape_string(b));
}

}  // namespace arcrec
