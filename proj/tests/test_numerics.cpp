#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "hyperbandit/errors.hpp"
#include "hyperbandit/numerics.hpp"
#include "oracles.hpp"

using namespace hyperbandit;

TEST_CASE("solve_spd: identity and scalar matrices") {
    const Vector x = solve_spd(Matrix::identity(3), Vector{1, 2, 3});
    CHECK(x == Vector{1, 2, 3});

    Matrix m = Matrix::identity(2);
    m *= 0.1;
    const Vector y = solve_spd(m, Vector{1, 0});
    CHECK(y[0] == doctest::Approx(10.0).epsilon(1e-14));
    CHECK(y[1] == 0.0);
}

TEST_CASE("solve_spd matches full-pivoting elimination on random 10x10") {
    std::mt19937_64 g(11);
    for (int trial = 0; trial < 25; ++trial) {
        const Matrix m = oracle::random_spd(g, 10);
        const Vector v = oracle::random_vector(g, 10);
        const Vector x = solve_spd(m, v);
        const auto want = oracle::gauss_solve(oracle::to_long(m), oracle::LVec(v.begin(), v.end()));
        for (std::size_t i = 0; i < 10; ++i) CHECK(std::fabs(x[i] - static_cast<double>(want[i])) <= 1e-8);

        // residual contract
        const Vector mx = matvec(m, x);
        double worst = 0.0;
        for (std::size_t i = 0; i < 10; ++i) worst = std::max(worst, std::fabs(mx[i] - v[i]));
        CHECK(worst <= 1e-8 * (1.0 + max_abs(v)));
    }
}

TEST_CASE("solve_spd(m, m x) recovers x for sizes up to 32") {
    std::mt19937_64 g(12);
    for (std::size_t n : {1u, 2u, 5u, 12u, 20u, 32u}) {
        const Matrix m = oracle::random_spd(g, n, 1.0);
        const Vector x = oracle::random_vector(g, n);
        const Vector got = solve_spd(m, matvec(m, x));
        for (std::size_t i = 0; i < n; ++i) CHECK(oracle::rel_err(got[i], x[i], 1.0L) < 1e-7);
    }
}

TEST_CASE("solve_spd errors") {
    CHECK_THROWS_AS(solve_spd(Matrix{{1, 0}, {0, -1}}, Vector{1, 1}), NotSpd);
    CHECK_THROWS_AS(solve_spd(Matrix{{1, 0.5}, {0, 1}}, Vector{1, 1}), NotSpd);
    CHECK_THROWS_AS(solve_spd(Matrix::identity(2), Vector{1, 1, 1}), DimMismatch);
    CHECK_THROWS_AS(solve_spd(Matrix(2, 3), Vector{1, 1}), DimMismatch);
}

TEST_CASE("Cholesky inverse quadratic form equals v^T m^-1 v") {
    std::mt19937_64 g(13);
    const Matrix m = oracle::random_spd(g, 6);
    const Vector v = oracle::random_vector(g, 6);
    const auto sol = oracle::gauss_solve(oracle::to_long(m), oracle::LVec(v.begin(), v.end()));
    long double want = 0;
    for (std::size_t i = 0; i < 6; ++i) want += v[i] * sol[i];
    CHECK(oracle::rel_err(Cholesky(m).inverse_quadratic_form(v), want) < 1e-10);
}

TEST_CASE("svd_values: trivial cases") {
    CHECK(svd_values(Matrix::identity(4)) == Vector{1, 1, 1, 1});

    Vector u{3, 4}, v{1, 2, 2};
    for (auto& x : u) x /= 5.0;
    for (auto& x : v) x /= 3.0;
    const Vector s = svd_values(Matrix::outer(u, v));
    REQUIRE(s.size() == 2);
    CHECK(s[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::fabs(s[1]) < 1e-12);
}

TEST_CASE("svd_values matches Jacobi eigenvalues of m^T m") {
    std::mt19937_64 g(14);
    for (auto [r, c] : {std::pair{6, 6}, std::pair{8, 3}, std::pair{3, 7}}) {
        const Matrix m = oracle::random_matrix(g, r, c);
        const Vector got = svd_values(m);
        const auto want = oracle::singular_values(m);
        REQUIRE(got.size() == want.size());
        for (std::size_t i = 0; i < got.size(); ++i) {
            CHECK(std::fabs(got[i] - static_cast<double>(want[i])) < 1e-7);
            CHECK(got[i] >= 0.0);
            if (i > 0) CHECK(got[i] <= got[i - 1]);
        }
    }
}

TEST_CASE("svd_values invariant under transposition") {
    std::mt19937_64 g(15);
    for (int trial = 0; trial < 10; ++trial) {
        const Matrix m = oracle::random_matrix(g, 7, 7);
        const Vector a = svd_values(m), b = svd_values(m.transpose());
        for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::fabs(a[i] - b[i]) <= 1e-9);
    }
}

TEST_CASE("softmax") {
    const Vector u = softmax(Vector{0, 0, 0});
    for (double x : u) CHECK(x == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

    for (double x0 : {-50.0, 0.0, 3.5, 700.0}) {
        const double c = 1.25;
        const Vector s = softmax(Vector{x0, x0 + c});
        CHECK(std::fabs(s[0] - 1.0 / (1.0 + std::exp(c))) < 1e-12);
        CHECK(std::fabs(s[1] - std::exp(c) / (1.0 + std::exp(c))) < 1e-12);
    }

    const Vector v{1, -1, 0};
    const Vector s = softmax(v);
    const auto want = oracle::softmax(v);
    for (std::size_t i = 0; i < 3; ++i) CHECK(std::fabs(s[i] - static_cast<double>(want[i])) < 1e-12);
}

TEST_CASE("softmax shift invariance and normalization") {
    std::mt19937_64 g(16);
    for (int trial = 0; trial < 50; ++trial) {
        Vector v = oracle::random_vector(g, 9, 5.0);
        const double c = std::normal_distribution<double>(0.0, 100.0)(g);
        Vector w = v;
        for (auto& x : w) x += c;
        const Vector a = softmax(v), b = softmax(w);
        double sum = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i) {
            CHECK(std::fabs(a[i] - b[i]) <= 1e-12);
            CHECK(a[i] > 0.0);
            sum += a[i];
        }
        CHECK(std::fabs(sum - 1.0) <= 1e-12);
    }
}

TEST_CASE("log_softmax agrees with log of softmax") {
    const Vector v{2.0, -3.0, 0.5, 10.0};
    const Vector ls = log_softmax(v), s = softmax(v);
    for (std::size_t i = 0; i < v.size(); ++i) CHECK(ls[i] == doctest::Approx(std::log(s[i])).epsilon(1e-12));
}

TEST_CASE("matrix products and helpers") {
    const Matrix a{{1, 2}, {3, 4}, {5, 6}};
    const Matrix b{{1, 0, 2}, {0, 1, 1}};
    const Matrix ab = a * b;
    CHECK(ab == Matrix{{1, 2, 4}, {3, 4, 10}, {5, 6, 16}});
    CHECK(a.transpose() == Matrix{{1, 3, 5}, {2, 4, 6}});
    CHECK(matvec(a, Vector{1, 1}) == Vector{3, 7, 11});
    CHECK(matvec_transposed(a, Vector{1, 0, 1}) == Vector{6, 8});
    CHECK(bilinear(Vector{1, 0, 1}, a, Vector{1, 1}) == 14.0);
    CHECK(a.row_block(1, 2) == Matrix{{3, 4}, {5, 6}});
    CHECK_THROWS_AS(a * a, DimMismatch);
    CHECK_THROWS_AS(dot(Vector{1}, Vector{1, 2}), DimMismatch);
}
