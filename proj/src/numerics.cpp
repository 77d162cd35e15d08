#include "hyperbandit/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "hyperbandit/errors.hpp"

namespace hyperbandit {

namespace {

void require(bool ok, const char* what) {
    if (!ok) throw DimMismatch(what);
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> row_major)
    : rows_(rows), cols_(cols), data_(std::move(row_major)) {
    require(data_.size() == rows * cols, "Matrix: buffer size does not match shape");
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows)
    : rows_(rows.size()), cols_(rows.size() ? rows.begin()->size() : 0) {
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
        require(r.size() == cols_, "Matrix: ragged initializer");
        data_.insert(data_.end(), r.begin(), r.end());
    }
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::outer(std::span<const double> u, std::span<const double> v) {
    Matrix m(u.size(), v.size());
    for (std::size_t i = 0; i < u.size(); ++i)
        for (std::size_t j = 0; j < v.size(); ++j) m(i, j) = u[i] * v[j];
    return m;
}

Matrix Matrix::transpose() const {
    Matrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
}

Matrix Matrix::row_block(std::size_t first, std::size_t count) const {
    require(first + count <= rows_, "Matrix::row_block: out of range");
    Matrix out(count, cols_);
    std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(first * cols_), count * cols_,
                out.data_.begin());
    return out;
}

Matrix& Matrix::operator+=(const Matrix& other) {
    require(rows_ == other.rows_ && cols_ == other.cols_, "Matrix +=: shape mismatch");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
}

Matrix& Matrix::operator*=(double s) {
    for (double& x : data_) x *= s;
    return *this;
}

Matrix operator*(const Matrix& a, const Matrix& b) {
    require(a.cols() == b.rows(), "Matrix *: inner dimension mismatch");
    Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto out = c.row(i);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            const auto brow = b.row(k);
            for (std::size_t j = 0; j < b.cols(); ++j) out[j] += aik * brow[j];
        }
    }
    return c;
}

Matrix operator+(Matrix a, const Matrix& b) {
    a += b;
    return a;
}

Matrix operator-(Matrix a, const Matrix& b) {
    require(a.rows() == b.rows() && a.cols() == b.cols(), "Matrix -: shape mismatch");
    auto ad = a.data();
    auto bd = b.data();
    for (std::size_t i = 0; i < ad.size(); ++i) ad[i] -= bd[i];
    return a;
}

Matrix operator*(double s, Matrix m) {
    m *= s;
    return m;
}

Vector matvec(const Matrix& m, std::span<const double> v) {
    require(m.cols() == v.size(), "matvec: dimension mismatch");
    Vector out(m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i) out[i] = dot(m.row(i), v);
    return out;
}

Vector matvec_transposed(const Matrix& m, std::span<const double> v) {
    require(m.rows() == v.size(), "matvec_transposed: dimension mismatch");
    Vector out(m.cols(), 0.0);
    for (std::size_t i = 0; i < m.rows(); ++i) axpy(v[i], m.row(i), out);
    return out;
}

double bilinear(std::span<const double> u, const Matrix& m, std::span<const double> v) {
    require(u.size() == m.rows() && v.size() == m.cols(), "bilinear: dimension mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < m.rows(); ++i) acc += u[i] * dot(m.row(i), v);
    return acc;
}

double dot(std::span<const double> a, std::span<const double> b) {
    require(a.size() == b.size(), "dot: dimension mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

double norm2(std::span<const double> v) { return std::sqrt(dot(v, v)); }

double max_abs(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

void axpy(double a, std::span<const double> x, std::span<double> y) {
    require(x.size() == y.size(), "axpy: dimension mismatch");
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

void add_outer(Matrix& m, double a, std::span<const double> u) {
    require(m.rows() == u.size() && m.cols() == u.size(), "add_outer: dimension mismatch");
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double s = a * u[i];
        auto r = m.row(i);
        for (std::size_t j = 0; j < u.size(); ++j) r[j] += s * u[j];
    }
}

Cholesky::Cholesky(const Matrix& m) : lower_(m.rows(), m.cols()) {
    if (m.rows() != m.cols()) throw DimMismatch("Cholesky: matrix is not square");
    const std::size_t n = m.rows();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < i; ++j)
            if (std::abs(m(i, j) - m(j, i)) > 1e-9)
                throw NotSpd("Cholesky: matrix is not symmetric at (" + std::to_string(i) + ", " +
                             std::to_string(j) + ")");

    for (std::size_t j = 0; j < n; ++j) {
        double diag = m(j, j);
        for (std::size_t k = 0; k < j; ++k) diag -= lower_(j, k) * lower_(j, k);
        if (!(diag > 0.0))
            throw NotSpd("Cholesky: non-positive pivot at " + std::to_string(j));
        const double ljj = std::sqrt(diag);
        lower_(j, j) = ljj;
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = m(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= lower_(i, k) * lower_(j, k);
            lower_(i, j) = s / ljj;
        }
    }
}

Vector Cholesky::forward_substitute(std::span<const double> v) const {
    const std::size_t n = dim();
    if (v.size() != n) throw DimMismatch("Cholesky: right-hand side has wrong dimension");
    Vector y(n);
    for (std::size_t i = 0; i < n; ++i) {
        double s = v[i];
        for (std::size_t k = 0; k < i; ++k) s -= lower_(i, k) * y[k];
        y[i] = s / lower_(i, i);
    }
    return y;
}

Vector Cholesky::solve(std::span<const double> v) const {
    Vector x = forward_substitute(v);
    const std::size_t n = dim();
    for (std::size_t ii = n; ii-- > 0;) {
        double s = x[ii];
        for (std::size_t k = ii + 1; k < n; ++k) s -= lower_(k, ii) * x[k];
        x[ii] = s / lower_(ii, ii);
    }
    return x;
}

double Cholesky::inverse_quadratic_form(std::span<const double> v) const {
    const Vector y = forward_substitute(v);
    return dot(y, y);
}

Vector solve_spd(const Matrix& m, std::span<const double> v) {
    if (m.rows() != m.cols() || v.size() != m.rows())
        throw DimMismatch("solve_spd: dimension mismatch");
    return Cholesky(m).solve(v);
}

Vector svd_values(const Matrix& m) {
    // Orthogonalize the columns of a tall copy; the column norms are then the
    // singular values.
    Matrix a = m.rows() >= m.cols() ? m : m.transpose();
    const std::size_t rows = a.rows();
    const std::size_t cols = a.cols();

    constexpr int kMaxSweeps = 100;
    constexpr double kTol = 1e-15;
    for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
        bool rotated = false;
        for (std::size_t p = 0; p + 1 < cols; ++p) {
            for (std::size_t q = p + 1; q < cols; ++q) {
                double alpha = 0.0, beta = 0.0, gamma = 0.0;
                for (std::size_t i = 0; i < rows; ++i) {
                    alpha += a(i, p) * a(i, p);
                    beta += a(i, q) * a(i, q);
                    gamma += a(i, p) * a(i, q);
                }
                if (gamma == 0.0 || std::abs(gamma) <= kTol * std::sqrt(alpha * beta)) continue;
                rotated = true;
                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = std::copysign(1.0, zeta) /
                                 (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                for (std::size_t i = 0; i < rows; ++i) {
                    const double ap = a(i, p);
                    const double aq = a(i, q);
                    a(i, p) = c * ap - s * aq;
                    a(i, q) = s * ap + c * aq;
                }
            }
        }
        if (!rotated) break;
    }

    Vector values(cols);
    for (std::size_t j = 0; j < cols; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < rows; ++i) s += a(i, j) * a(i, j);
        values[j] = std::sqrt(s);
    }
    std::sort(values.begin(), values.end(), std::greater<>());
    return values;
}

Vector softmax(std::span<const double> v) {
    Vector out(v.size());
    if (v.empty()) return out;
    const double mx = *std::max_element(v.begin(), v.end());
    double total = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[i] = std::exp(v[i] - mx);
        total += out[i];
    }
    for (double& x : out) x /= total;
    return out;
}

Vector log_softmax(std::span<const double> v) {
    Vector out(v.size());
    if (v.empty()) return out;
    const double mx = *std::max_element(v.begin(), v.end());
    double total = 0.0;
    for (double x : v) total += std::exp(x - mx);
    const double log_norm = mx + std::log(total);
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] - log_norm;
    return out;
}

}  // namespace hyperbandit
