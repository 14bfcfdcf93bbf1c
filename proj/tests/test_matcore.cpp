#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "dsrc/matcore.hpp"
#include "test_support.hpp"

using namespace dsrc;
using namespace dsrc::matcore;
using test_support::bitwise_equal;
using test_support::max_abs_diff;
using test_support::random_matrix;
using test_support::random_spd_raw;

TEST_CASE("dense matrix construction rejects non-finite entries") {
    CHECK_THROWS_AS(DenseMatrix(1, 2, {1.0, std::nan("")}), ContractError);
    CHECK_THROWS_AS(DenseMatrix(1, 1, {1.0, 2.0}), ContractError);
}

TEST_CASE("gemm identity and counting cases") {
    DenseMatrix a(3, 4, {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12});
    CHECK(bitwise_equal(gemm_blocked(DenseMatrix::identity(3), a), a));

    DenseMatrix ones23(2, 3, std::vector<double>(6, 1.0));
    DenseMatrix ones32(3, 2, std::vector<double>(6, 1.0));
    DenseMatrix p = gemm_blocked(ones23, ones32);
    for (std::size_t i = 0; i < p.size(); ++i) CHECK(p.data()[i] == 3.0);
}

TEST_CASE("gemm rejects non-conforming shapes") {
    DenseMatrix a(2, 3), b(2, 3);
    CHECK_THROWS_AS(gemm_blocked(a, b), ContractError);
    CHECK_NOTHROW(gemm_blocked(a, b, false, true));
    CHECK_NOTHROW(gemm_blocked(a, b, true, false));
}

TEST_CASE("blocked gemm matches the naive reference bit for bit") {
    std::mt19937_64 rng(11);
    DenseMatrix a = random_matrix(64, 64, rng);
    DenseMatrix b = random_matrix(64, 64, rng);
    CHECK(max_abs_diff(gemm_blocked(a, b), gemm_naive(a, b)) == 0.0);

    // Randomized sizes (<= 128) straddling the tile boundary, with
    // transpose flags.
    for (int trial = 0; trial < 12; ++trial) {
        std::size_t m = 1 + rng() % 128, n = 1 + rng() % 128, k = 1 + rng() % 128;
        bool ta = rng() % 2, tb = rng() % 2;
        DenseMatrix x = random_matrix(ta ? k : m, ta ? m : k, rng);
        DenseMatrix y = random_matrix(tb ? n : k, tb ? k : n, rng);
        CHECK(bitwise_equal(gemm_blocked(x, y, ta, tb), gemm_naive(x, y, ta, tb)));
    }
}

TEST_CASE("gemm result is invariant to worker count") {
    std::mt19937_64 rng(13);
    DenseMatrix a = random_matrix(150, 90, rng);
    DenseMatrix b = random_matrix(90, 170, rng);
    set_worker_count(1);
    DenseMatrix r1 = gemm_blocked(a, b);
    set_worker_count(2);
    DenseMatrix r2 = gemm_blocked(a, b);
    set_worker_count(8);
    DenseMatrix r8 = gemm_blocked(a, b);
    set_worker_count(0);
    CHECK(bitwise_equal(r1, r2));
    CHECK(bitwise_equal(r1, r8));
}

TEST_CASE("gemm result is invariant to tile size") {
    std::mt19937_64 rng(17);
    DenseMatrix a = random_matrix(100, 70, rng);
    DenseMatrix b = random_matrix(70, 60, rng);
    DenseMatrix base = gemm_naive(a, b);
    for (std::size_t t : {8u, 17u, 64u, 256u}) {
        set_tile_size(t);
        CHECK(bitwise_equal(gemm_blocked(a, b), base));
    }
    set_tile_size(64);
}

TEST_CASE("cholesky of identity is identity") {
    SpdMatrix eye = SpdMatrix::identity(5);
    CHECK(bitwise_equal(cholesky_factor(eye), DenseMatrix::identity(5)));
}

TEST_CASE("cholesky 2x2 closed form") {
    SpdMatrix a = SpdMatrix::certify(DenseMatrix(2, 2, {4, 2, 2, 3}));
    DenseMatrix l = cholesky_factor(a);
    CHECK(l.at(0, 0) == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(l.at(0, 1) == 0.0);
    CHECK(l.at(1, 0) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(l.at(1, 1) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-14));
}

TEST_CASE("cholesky reports the failing pivot for an indefinite matrix") {
    // Eigenvalues 3 and -1.
    DenseMatrix a(2, 2, {1, 2, 2, 1});
    try {
        cholesky_factor_raw(a);
        FAIL("expected NotSpdError");
    } catch (const NotSpdError& e) {
        CHECK(e.pivot_index == 1);
    }
}

TEST_CASE("cholesky reconstructs random SPD matrices") {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 10; ++trial) {
        std::size_t n = 2 + rng() % 40;
        DenseMatrix a = random_spd_raw(n, rng);
        DenseMatrix l = cholesky_factor_raw(a);
        DenseMatrix back = gemm_naive(l, l, false, true);
        CHECK(subtract(back, a).frobenius_norm() <= 1e-10 * a.frobenius_norm());
    }
}

TEST_CASE("solve_spd trivial and residual cases") {
    DenseMatrix b(2, 1, {2, 4});
    CHECK(max_abs_diff(solve_spd(SpdMatrix::identity(2), b), b) == 0.0);

    SpdMatrix d = SpdMatrix::diagonal({2, 4});
    DenseMatrix x = solve_spd(d, b);
    CHECK(x.at(0, 0) == doctest::Approx(1.0));
    CHECK(x.at(1, 0) == doctest::Approx(1.0));

    std::mt19937_64 rng(29);
    SpdMatrix a = SpdMatrix::certify(random_spd_raw(32, rng));
    DenseMatrix rhs = random_matrix(32, 5, rng);
    DenseMatrix sol = solve_spd(a, rhs);
    DenseMatrix residual = subtract(gemm_naive(a.matrix(), sol), rhs);
    CHECK(residual.frobenius_norm() <= 1e-8 * rhs.frobenius_norm());
}

TEST_CASE("solve_spd_right solves X a = b") {
    std::mt19937_64 rng(31);
    SpdMatrix a = SpdMatrix::certify(random_spd_raw(12, rng));
    DenseMatrix b = random_matrix(7, 12, rng);
    DenseMatrix x = solve_spd_right(a, b);
    DenseMatrix residual = subtract(gemm_naive(x, a.matrix()), b);
    CHECK(residual.frobenius_norm() <= 1e-8 * b.frobenius_norm());
}

TEST_CASE("symmetrize leaves a symmetric SPD matrix unchanged") {
    std::mt19937_64 rng(37);
    DenseMatrix a = random_spd_raw(6, rng);
    SpdMatrix s = symmetrize(a);
    CHECK(bitwise_equal(s.matrix(), a));
}

TEST_CASE("symmetrize averages a tiny asymmetric perturbation") {
    DenseMatrix a(2, 2, {2, 1.0 + 1e-12, 1.0, 2});
    SpdMatrix s = symmetrize(a);
    CHECK(s.at(0, 1) == doctest::Approx(1.0 + 5e-13).epsilon(1e-15));
    CHECK(s.at(0, 1) == s.at(1, 0));
}

TEST_CASE("symmetrize jitters a singular matrix into SPD") {
    // Rank-1, min eigenvalue exactly 0.
    DenseMatrix v(3, 1, {1, 2, 3});
    DenseMatrix a = gemm_naive(v, v, false, true);
    SpdMatrix s = symmetrize(a);
    // Cholesky succeeded; all pivots of the factor positive.
    const DenseMatrix& l = s.cholesky();
    for (std::size_t i = 0; i < 3; ++i) CHECK(l.at(i, i) > 0.0);
    // Jitter is bounded by 15 * 1e-10 * trace/dim.
    CHECK(max_abs_diff(s.matrix(), a) <= 15.0 * 1e-10 * a.trace() / 3.0);
}

TEST_CASE("symmetrize gives up on a genuinely indefinite matrix") {
    DenseMatrix a(2, 2, {1, 2, 2, 1});
    CHECK_THROWS_AS(symmetrize(a), NotSpdError);
}

TEST_CASE("spd certification rejects gross asymmetry") {
    DenseMatrix a(2, 2, {4, 1.0, 1.1, 3});
    CHECK_THROWS_AS(SpdMatrix::certify(a), ContractError);
}
