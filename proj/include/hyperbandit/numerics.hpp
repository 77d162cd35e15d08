// Small dense linear algebra and probability kernels.
//
// Storage is row-major everywhere; the hypernetwork's flattened output and the
// checkpoint formats rely on this.
#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace hyperbandit {

using Vector = std::vector<double>;

class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> row_major);
    Matrix(std::initializer_list<std::initializer_list<double>> rows);

    static Matrix identity(std::size_t n);
    static Matrix outer(std::span<const double> u, std::span<const double> v);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }

    Matrix transpose() const;
    /// Rows [first, first + count) as a new matrix.
    Matrix row_block(std::size_t first, std::size_t count) const;

    Matrix& operator+=(const Matrix& other);
    Matrix& operator*=(double s);

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

Matrix operator*(const Matrix& a, const Matrix& b);
Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator*(double s, Matrix m);

/// m * v
Vector matvec(const Matrix& m, std::span<const double> v);
/// m^T * v
Vector matvec_transposed(const Matrix& m, std::span<const double> v);
/// u^T m v
double bilinear(std::span<const double> u, const Matrix& m, std::span<const double> v);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> v);
double max_abs(std::span<const double> v);
/// y += a * x
void axpy(double a, std::span<const double> x, std::span<double> y);
/// m += a * u u^T
void add_outer(Matrix& m, double a, std::span<const double> u);

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
/// Throws NotSpd on a non-positive pivot or asymmetry beyond 1e-9.
class Cholesky {
public:
    explicit Cholesky(const Matrix& m);

    std::size_t dim() const noexcept { return lower_.rows(); }
    const Matrix& lower() const noexcept { return lower_; }

    Vector solve(std::span<const double> v) const;
    /// v^T m^{-1} v, computed as |L^{-1} v|^2.
    double inverse_quadratic_form(std::span<const double> v) const;

private:
    Vector forward_substitute(std::span<const double> v) const;

    Matrix lower_;
};

/// Solve m x = v for symmetric positive-definite m.
Vector solve_spd(const Matrix& m, std::span<const double> v);

/// Singular values in descending order, length min(rows, cols).
/// One-sided Jacobi.
Vector svd_values(const Matrix& m);

Vector softmax(std::span<const double> v);
Vector log_softmax(std::span<const double> v);

}  // namespace hyperbandit
