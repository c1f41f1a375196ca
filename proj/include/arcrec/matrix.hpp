#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace arcrec {

/// Base of every error the library raises. The CLI maps the subclasses to
/// distinct exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Malformed or inconsistent input data.
class DataError : public Error {
public:
    using Error::Error;
};

/// Numerical failure during computation (shape mismatch, non-finite value).
class NumericError : public Error {
public:
    using Error::Error;
};

/// Dense row-major matrix of doubles. A column vector is an n x 1 matrix.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    static Matrix column(std::span<const double> values);
    static Matrix row(std::span<const double> values);
    static Matrix column(std::initializer_list<double> values);
    static Matrix row(std::initializer_list<double> values);
    static Matrix scalar(double v) { return Matrix(1, 1, v); }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }
    bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    std::span<double> row_span(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row_span(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& values() { return data_; }
    const std::vector<double>& values() const { return data_; }

    void fill(double v);
    Matrix transposed() const;
    double scalar_value() const;
    bool all_finite() const;
    double squared_norm() const;

    Matrix& operator+=(const Matrix& o);
    Matrix& operator-=(const Matrix& o);
    Matrix& operator*=(double s);

    bool operator==(const Matrix& o) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator*(Matrix a, double s);

/// C = A * B.
Matrix matmul(const Matrix& a, const Matrix& b);

std::string shape_string(const Matrix& m);

void require_same_shape(const Matrix& a, const Matrix& b, const char* what);

}  // namespace arcrec
