#pragma once

#include <cstddef>
#include <vector>

#include "dsrc/errors.hpp"

namespace dsrc::matcore {

// Dense row-major matrix of binary64 values. Immutable by convention once
// built; every public kernel returns a fresh matrix.
class DenseMatrix {
public:
    DenseMatrix() = default;
    DenseMatrix(std::size_t rows, std::size_t cols);
    DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    static DenseMatrix identity(std::size_t n);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }

    double& at(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double at(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    DenseMatrix transposed() const;
    double trace() const;
    double frobenius_norm() const;

    // Throws ContractError if any entry is NaN or Inf.
    void check_finite(const char* what) const;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// Square matrix certified symmetric positive-definite. Keeps the lower
// Cholesky factor computed during certification so solves can reuse it.
class SpdMatrix {
public:
    SpdMatrix() = default;

    // Certifies symmetry (max|A_ij - A_ji| <= 1e-10 max|A_ij|) and
    // positive-definiteness via Cholesky. Throws ContractError / NotSpdError.
    static SpdMatrix certify(DenseMatrix a);

    static SpdMatrix identity(std::size_t n);
    static SpdMatrix diagonal(const std::vector<double>& d);

    std::size_t dim() const { return mat_.rows(); }
    const DenseMatrix& matrix() const { return mat_; }
    const DenseMatrix& cholesky() const { return chol_; }
    double at(std::size_t r, std::size_t c) const { return mat_.at(r, c); }
    double trace() const { return mat_.trace(); }

private:
    DenseMatrix mat_;
    DenseMatrix chol_;  // lower triangular, mat_ = chol_ chol_^T
};

// Worker count for the blocked kernels. 0 means the OpenMP default.
// Results are bitwise identical for every setting.
void set_worker_count(int n);
int worker_count();

// Tile edge for gemm_blocked; overridable via the DSRC_TILE environment
// variable (read once at startup) or explicitly here. Affects speed only,
// never results.
void set_tile_size(std::size_t t);
std::size_t tile_size();

// Tiled parallel product op(a) * op(b). Tiles are reduced in a fixed order,
// so for each output entry the summation order over k is ascending and the
// result matches gemm_naive bit for bit at any worker count.
DenseMatrix gemm_blocked(const DenseMatrix& a, const DenseMatrix& b,
                         bool transpose_a = false, bool transpose_b = false);

// Serial triple-loop reference with the same ascending-k summation order.
// Kept as the oracle for gemm_blocked and for the kernel benchmark.
DenseMatrix gemm_naive(const DenseMatrix& a, const DenseMatrix& b,
                       bool transpose_a = false, bool transpose_b = false);

// a - b, a + b; dimension-checked.
DenseMatrix subtract(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix add(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix scale(const DenseMatrix& a, double s);

// Lower Cholesky factor of a. Internal variant for raw matrices throws
// NotSpdError with the failing pivot index.
DenseMatrix cholesky_factor(const SpdMatrix& a);
DenseMatrix cholesky_factor_raw(const DenseMatrix& a);

// Solves a X = b using the cached factor of a.
DenseMatrix solve_spd(const SpdMatrix& a, const DenseMatrix& b);

// Solves X a = b (i.e. X = b a^-1) as a transposed SPD solve.
DenseMatrix solve_spd_right(const SpdMatrix& a, const DenseMatrix& b);

// Returns (a + a^T)/2 certified SPD. If the average is not
// positive-definite, adds diagonal jitter 1e-10 trace/dim and retries with
// up to 3 doublings before giving up with NotSpdError.
SpdMatrix symmetrize(const DenseMatrix& a);

}  // namespace dsrc::matcore
