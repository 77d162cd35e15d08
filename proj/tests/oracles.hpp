// Reference implementations for tests. Deliberately naive and independent of
// the library: long double, Gaussian elimination, Jacobi eigenvalues.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>
#include <stdexcept>
#include <vector>

#include "hyperbandit/hypernet.hpp"
#include "hyperbandit/numerics.hpp"
#include "hyperbandit/temporal.hpp"

namespace oracle {

using LMat = std::vector<std::vector<long double>>;
using LVec = std::vector<long double>;

inline LMat to_long(const hyperbandit::Matrix& m) {
    LMat out(m.rows(), LVec(m.cols()));
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) out[i][j] = m(i, j);
    return out;
}

/// Gaussian elimination with full pivoting.
inline LVec gauss_solve(LMat a, LVec b) {
    const std::size_t n = a.size();
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t pr = k, pc = k;
        for (std::size_t r = k; r < n; ++r)
            for (std::size_t c = k; c < n; ++c)
                if (std::fabs(a[r][c]) > std::fabs(a[pr][pc])) {
                    pr = r;
                    pc = c;
                }
        if (a[pr][pc] == 0.0L) throw std::runtime_error("singular");
        std::swap(a[pr], a[k]);
        std::swap(b[pr], b[k]);
        for (auto& row : a) std::swap(row[pc], row[k]);
        std::swap(perm[pc], perm[k]);
        for (std::size_t r = k + 1; r < n; ++r) {
            const long double f = a[r][k] / a[k][k];
            for (std::size_t c = k; c < n; ++c) a[r][c] -= f * a[k][c];
            b[r] -= f * b[k];
        }
    }
    LVec y(n);
    for (std::size_t i = n; i-- > 0;) {
        long double s = b[i];
        for (std::size_t c = i + 1; c < n; ++c) s -= a[i][c] * y[c];
        y[i] = s / a[i][i];
    }
    LVec x(n);
    for (std::size_t i = 0; i < n; ++i) x[perm[i]] = y[i];
    return x;
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, descending.
inline LVec symmetric_eigenvalues(LMat a) {
    const std::size_t n = a.size();
    for (int sweep = 0; sweep < 200; ++sweep) {
        long double off = 0.0L;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) off += a[i][j] * a[i][j];
        if (off < 1e-36L) break;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                if (a[p][q] == 0.0L) continue;
                const long double theta = (a[q][q] - a[p][p]) / (2.0L * a[p][q]);
                const long double t = (theta >= 0 ? 1.0L : -1.0L) / (std::fabs(theta) + std::sqrt(theta * theta + 1.0L));
                const long double c = 1.0L / std::sqrt(t * t + 1.0L), s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const long double akp = a[k][p], akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const long double apk = a[p][k], aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    LVec ev(n);
    for (std::size_t i = 0; i < n; ++i) ev[i] = a[i][i];
    std::sort(ev.begin(), ev.end(), std::greater<>());
    return ev;
}

/// Singular values as square roots of the eigenvalues of M^T M (or M M^T,
/// whichever is smaller), padded to min(rows, cols).
inline LVec singular_values(const hyperbandit::Matrix& m) {
    const LMat a = to_long(m);
    const bool tall = m.rows() >= m.cols();
    const std::size_t k = tall ? m.cols() : m.rows();
    LMat g(k, LVec(k, 0.0L));
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j)
            for (std::size_t r = 0; r < (tall ? m.rows() : m.cols()); ++r)
                g[i][j] += tall ? a[r][i] * a[r][j] : a[i][r] * a[j][r];
    LVec ev = symmetric_eigenvalues(g);
    for (auto& v : ev) v = std::sqrt(std::max(v, 0.0L));
    return ev;
}

inline LVec softmax(const std::vector<double>& v) {
    LVec out(v.size());
    long double z = 0.0L;
    for (double x : v) z += std::exp(static_cast<long double>(x));
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::exp(static_cast<long double>(v[i])) / z;
    return out;
}

/// argmin_x Σ (q_i·s + p_i·x − r_i)² + λ|x|², solved from the normal
/// equations built by explicit summation.
inline LVec ridge(const std::vector<std::vector<double>>& ps, const std::vector<double>& targets, double lambda) {
    const std::size_t l = ps.empty() ? 0 : ps.front().size();
    LMat a(l, LVec(l, 0.0L));
    LVec b(l, 0.0L);
    for (std::size_t i = 0; i < l; ++i) a[i][i] = lambda;
    for (std::size_t k = 0; k < ps.size(); ++k)
        for (std::size_t i = 0; i < l; ++i) {
            b[i] += static_cast<long double>(ps[k][i]) * targets[k];
            for (std::size_t j = 0; j < l; ++j) a[i][j] += static_cast<long double>(ps[k][i]) * ps[k][j];
        }
    return gauss_solve(a, b);
}

inline hyperbandit::Matrix random_matrix(std::mt19937_64& g, std::size_t r, std::size_t c, double scale = 1.0) {
    std::normal_distribution<double> n(0.0, scale);
    hyperbandit::Matrix m(r, c);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) m(i, j) = n(g);
    return m;
}

inline std::vector<double> random_vector(std::mt19937_64& g, std::size_t n, double scale = 1.0) {
    std::normal_distribution<double> d(0.0, scale);
    std::vector<double> v(n);
    for (auto& x : v) x = d(g);
    return v;
}

/// A A^T + shift·I.
inline hyperbandit::Matrix random_spd(std::mt19937_64& g, std::size_t n, double shift = 0.5) {
    const auto a = random_matrix(g, n, n);
    hyperbandit::Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double s = i == j ? shift : 0.0;
            for (std::size_t k = 0; k < n; ++k) s += a(i, k) * a(j, k);
            m(i, j) = s;
        }
    return m;
}

inline double rel_err(long double got, long double want, long double floor = 1e-12L) {
    return static_cast<double>(std::fabs(got - want) / std::max(std::fabs(want), floor));
}

/// Forward pass written from the documented layout: per layer, a fan_out ×
/// fan_in row-major weight block then the bias; ReLU between layers.
inline LVec reference_output(const hyperbandit::HyperNetwork& hn, const std::vector<double>& input) {
    const auto params = hn.parameters();
    const auto& sizes = hn.layer_sizes();
    LVec act(input.begin(), input.end());
    std::size_t offset = 0;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        const std::size_t in = sizes[l], out = sizes[l + 1];
        LVec next(out, 0.0L);
        for (std::size_t o = 0; o < out; ++o) {
            for (std::size_t i = 0; i < in; ++i) next[o] += params[offset + o * in + i] * act[i];
            next[o] += params[offset + out * in + o];
        }
        offset += out * in + out;
        if (l + 2 < sizes.size())
            for (auto& v : next) v = std::max(v, 0.0L);
        act = next;
    }
    return act;
}

/// Θ from the documented output layouts: full is row-major d_a × d_u; low
/// rank is A (d_a × τ) then B (d_u × τ), Θ = A B^T.
inline LMat reference_theta(const hyperbandit::HyperNetwork& hn, const std::vector<double>& input) {
    const auto out = reference_output(hn, input);
    const auto& s = hn.shape();
    const std::size_t da = s.item_dim(), du = s.user_dim;
    LMat theta(da, LVec(du, 0.0L));
    for (std::size_t i = 0; i < da; ++i)
        for (std::size_t j = 0; j < du; ++j) {
            if (s.rank == 0) {
                theta[i][j] = out[i * du + j];
            } else {
                for (std::size_t k = 0; k < s.rank; ++k)
                    theta[i][j] += out[i * s.rank + k] * out[da * s.rank + j * s.rank + k];
            }
        }
    return theta;
}

inline LVec softmax_long(const LVec& v) {
    const long double m = *std::max_element(v.begin(), v.end());
    LVec out(v.size());
    long double z = 0.0L;
    for (std::size_t i = 0; i < v.size(); ++i) z += out[i] = std::exp(v[i] - m);
    for (auto& x : out) x /= z;
    return out;
}

/// ListNet loss summed over records, entirely in long double.
inline long double reference_loss(const hyperbandit::HyperNetwork& hn,
                                  const std::vector<hyperbandit::InteractionRecord>& buffer,
                                  const hyperbandit::ContextSource& ctx, hyperbandit::LabelRule rule) {
    long double total = 0.0L;
    for (const auto& r : buffer) {
        const auto theta = reference_theta(hn, hyperbandit::euler_embed(r.period));
        const auto cu = ctx.user_context(r.user);
        LVec scores, labels;
        for (std::size_t c : r.candidates) {
            const auto ca = ctx.item_context(c);
            long double s = 0.0L;
            for (std::size_t i = 0; i < ca.size(); ++i)
                for (std::size_t j = 0; j < cu.size(); ++j) s += ca[i] * theta[i][j] * cu[j];
            scores.push_back(s);
            labels.push_back(c != r.chosen                            ? 0.0L
                             : rule == hyperbandit::LabelRule::Click ? (r.reward > 0.5 ? 1.0L : -1.0L)
                                                                      : static_cast<long double>(r.reward));
        }
        const auto p = softmax_long(labels), q = softmax_long(scores);
        for (std::size_t k = 0; k < p.size(); ++k) total -= p[k] * std::log(q[k]);
    }
    return total;
}

/// Central difference of reference_loss in each parameter. The step actually
/// taken is measured after rounding the perturbed parameter to double.
inline LVec reference_gradient(hyperbandit::HyperNetwork& hn,
                               const std::vector<hyperbandit::InteractionRecord>& buffer,
                               const hyperbandit::ContextSource& ctx, hyperbandit::LabelRule rule,
                               double h = 1e-5) {
    auto params = hn.parameters();
    LVec grad(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double keep = params[i];
        params[i] = keep + h;
        const long double up_step = static_cast<long double>(params[i]) - keep;
        const long double up = reference_loss(hn, buffer, ctx, rule);
        params[i] = keep - h;
        const long double down_step = keep - static_cast<long double>(params[i]);
        const long double down = reference_loss(hn, buffer, ctx, rule);
        params[i] = keep;
        grad[i] = (up - down) / (up_step + down_step);
    }
    return grad;
}

}  // namespace oracle
