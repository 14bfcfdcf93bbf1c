#include "dsrc/matcore.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace dsrc::matcore {

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_)
        throw ContractError("DenseMatrix: data length " + std::to_string(data_.size()) +
                            " != rows*cols " + std::to_string(rows_ * cols_));
    check_finite("DenseMatrix");
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m.at(i, i) = 1.0;
    return m;
}

DenseMatrix DenseMatrix::transposed() const {
    DenseMatrix t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
        for (std::size_t c = 0; c < cols_; ++c)
            t.at(c, r) = at(r, c);
    return t;
}

double DenseMatrix::trace() const {
    std::size_t n = std::min(rows_, cols_);
    double t = 0.0;
    for (std::size_t i = 0; i < n; ++i) t += at(i, i);
    return t;
}

double DenseMatrix::frobenius_norm() const {
    double s = 0.0;
    for (double v : data_) s += v * v;
    return std::sqrt(s);
}

void DenseMatrix::check_finite(const char* what) const {
    for (std::size_t i = 0; i < data_.size(); ++i)
        if (!std::isfinite(data_[i]))
            throw ContractError(std::string(what) + ": non-finite entry at flat index " +
                                std::to_string(i));
}

SpdMatrix SpdMatrix::certify(DenseMatrix a) {
    if (a.rows() != a.cols())
        throw ContractError("SpdMatrix: matrix is not square");
    a.check_finite("SpdMatrix");
    double max_abs = 0.0, max_asym = 0.0;
    for (std::size_t r = 0; r < a.rows(); ++r)
        for (std::size_t c = 0; c < a.cols(); ++c) {
            max_abs = std::max(max_abs, std::fabs(a.at(r, c)));
            if (c > r) max_asym = std::max(max_asym, std::fabs(a.at(r, c) - a.at(c, r)));
        }
    if (max_asym > 1e-10 * max_abs && max_abs > 0.0)
        throw ContractError("SpdMatrix: asymmetry " + std::to_string(max_asym) +
                            " exceeds 1e-10 * " + std::to_string(max_abs));
    SpdMatrix s;
    s.chol_ = cholesky_factor_raw(a);
    s.mat_ = std::move(a);
    return s;
}

SpdMatrix SpdMatrix::identity(std::size_t n) {
    return certify(DenseMatrix::identity(n));
}

SpdMatrix SpdMatrix::diagonal(const std::vector<double>& d) {
    DenseMatrix m(d.size(), d.size());
    for (std::size_t i = 0; i < d.size(); ++i) m.at(i, i) = d[i];
    return certify(std::move(m));
}

namespace {

std::atomic<int> g_workers{0};

std::size_t initial_tile() {
    if (const char* env = std::getenv("DSRC_TILE")) {
        long v = std::atol(env);
        if (v >= 8 && v <= 1024) return static_cast<std::size_t>(v);
    }
    return 64;
}

std::atomic<std::size_t> g_tile{initial_tile()};

}  // namespace

void set_worker_count(int n) { g_workers.store(n < 0 ? 0 : n); }
int worker_count() { return g_workers.load(); }
void set_tile_size(std::size_t t) { g_tile.store(std::clamp<std::size_t>(t, 8, 1024)); }
std::size_t tile_size() { return g_tile.load(); }

namespace {

void check_gemm_dims(const DenseMatrix& a, const DenseMatrix& b,
                     bool ta, bool tb, std::size_t& m, std::size_t& n, std::size_t& k) {
    m = ta ? a.cols() : a.rows();
    k = ta ? a.rows() : a.cols();
    std::size_t kb = tb ? b.cols() : b.rows();
    n = tb ? b.rows() : b.cols();
    if (k != kb)
        throw ContractError("gemm: inner dimensions " + std::to_string(k) + " vs " +
                            std::to_string(kb) + " do not conform");
}

}  // namespace

DenseMatrix gemm_naive(const DenseMatrix& a_in, const DenseMatrix& b_in,
                       bool transpose_a, bool transpose_b) {
    std::size_t m, n, k;
    check_gemm_dims(a_in, b_in, transpose_a, transpose_b, m, n, k);
    const DenseMatrix a = transpose_a ? a_in.transposed() : a_in;
    const DenseMatrix b = transpose_b ? b_in.transposed() : b_in;
    DenseMatrix c(m, n);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) acc += a.at(i, p) * b.at(p, j);
            c.at(i, j) = acc;
        }
    return c;
}

DenseMatrix gemm_blocked(const DenseMatrix& a_in, const DenseMatrix& b_in,
                         bool transpose_a, bool transpose_b) {
    std::size_t m, n, k;
    check_gemm_dims(a_in, b_in, transpose_a, transpose_b, m, n, k);
    const DenseMatrix a = transpose_a ? a_in.transposed() : a_in;
    const DenseMatrix b = transpose_b ? b_in.transposed() : b_in;
    DenseMatrix c(m, n);

    const std::size_t T = tile_size();
    const std::ptrdiff_t n_it = static_cast<std::ptrdiff_t>((m + T - 1) / T);
    const std::ptrdiff_t n_jt = static_cast<std::ptrdiff_t>((n + T - 1) / T);
    const std::size_t n_kt = (k + T - 1) / T;

    const double* pa = a.data();
    const double* pb = b.data();
    double* pc = c.data();

#ifdef _OPENMP
    int threads = g_workers.load();
    if (threads <= 0) threads = omp_get_max_threads();
#pragma omp parallel for collapse(2) schedule(static) num_threads(threads)
#endif
    for (std::ptrdiff_t it = 0; it < n_it; ++it) {
        for (std::ptrdiff_t jt = 0; jt < n_jt; ++jt) {
            const std::size_t i0 = static_cast<std::size_t>(it) * T;
            const std::size_t j0 = static_cast<std::size_t>(jt) * T;
            const std::size_t i1 = std::min(i0 + T, m);
            const std::size_t j1 = std::min(j0 + T, n);
            // Each output tile is owned by one worker; k-tiles reduce in
            // ascending order so every entry sums k ascending, exactly as
            // gemm_naive does.
            for (std::size_t kt = 0; kt < n_kt; ++kt) {
                const std::size_t k0 = kt * T;
                const std::size_t k1 = std::min(k0 + T, k);
                for (std::size_t i = i0; i < i1; ++i) {
                    double* crow = pc + i * n;
                    for (std::size_t p = k0; p < k1; ++p) {
                        const double av = pa[i * k + p];
                        const double* brow = pb + p * n;
                        for (std::size_t j = j0; j < j1; ++j)
                            crow[j] += av * brow[j];
                    }
                }
            }
        }
    }
    c.check_finite("gemm_blocked result");
    return c;
}

DenseMatrix subtract(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw ContractError("subtract: dimension mismatch");
    DenseMatrix c(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.size(); ++i) c.data()[i] = a.data()[i] - b.data()[i];
    return c;
}

DenseMatrix add(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw ContractError("add: dimension mismatch");
    DenseMatrix c(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.size(); ++i) c.data()[i] = a.data()[i] + b.data()[i];
    return c;
}

DenseMatrix scale(const DenseMatrix& a, double s) {
    DenseMatrix c(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.size(); ++i) c.data()[i] = a.data()[i] * s;
    return c;
}

DenseMatrix cholesky_factor_raw(const DenseMatrix& a) {
    if (a.rows() != a.cols())
        throw ContractError("cholesky: matrix is not square");
    const std::size_t n = a.rows();
    DenseMatrix l(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        double d = a.at(j, j);
        for (std::size_t p = 0; p < j; ++p) d -= l.at(j, p) * l.at(j, p);
        if (!(d > 0.0))
            throw NotSpdError("cholesky: non-positive pivot " + std::to_string(d) +
                              " at index " + std::to_string(j), j);
        const double ljj = std::sqrt(d);
        l.at(j, j) = ljj;
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = a.at(i, j);
            for (std::size_t p = 0; p < j; ++p) s -= l.at(i, p) * l.at(j, p);
            l.at(i, j) = s / ljj;
        }
    }
    return l;
}

DenseMatrix cholesky_factor(const SpdMatrix& a) { return a.cholesky(); }

DenseMatrix solve_spd(const SpdMatrix& a, const DenseMatrix& b) {
    if (a.dim() != b.rows())
        throw ContractError("solve_spd: dimension mismatch");
    const std::size_t n = a.dim();
    const std::size_t m = b.cols();
    const DenseMatrix& l = a.cholesky();
    DenseMatrix x = b;
    // L z = b
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t p = 0; p < i; ++p) {
            const double lip = l.at(i, p);
            for (std::size_t c = 0; c < m; ++c) x.at(i, c) -= lip * x.at(p, c);
        }
        const double d = l.at(i, i);
        for (std::size_t c = 0; c < m; ++c) x.at(i, c) /= d;
    }
    // L^T x = z
    for (std::size_t ii = n; ii-- > 0;) {
        for (std::size_t p = ii + 1; p < n; ++p) {
            const double lpi = l.at(p, ii);
            for (std::size_t c = 0; c < m; ++c) x.at(ii, c) -= lpi * x.at(p, c);
        }
        const double d = l.at(ii, ii);
        for (std::size_t c = 0; c < m; ++c) x.at(ii, c) /= d;
    }
    return x;
}

DenseMatrix solve_spd_right(const SpdMatrix& a, const DenseMatrix& b) {
    // X a = b  <=>  a X^T = b^T since a is symmetric.
    return solve_spd(a, b.transposed()).transposed();
}

SpdMatrix symmetrize(const DenseMatrix& a) {
    if (a.rows() != a.cols())
        throw ContractError("symmetrize: matrix is not square");
    const std::size_t n = a.rows();
    DenseMatrix s(n, n);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < n; ++c)
            s.at(r, c) = 0.5 * (a.at(r, c) + a.at(c, r));
    s.check_finite("symmetrize");

    double jitter = 1e-10 * s.trace() / static_cast<double>(n);
    if (!(jitter > 0.0)) jitter = 1e-300;
    for (int attempt = 0; attempt <= 4; ++attempt) {
        try {
            return SpdMatrix::certify(s);
        } catch (const NotSpdError&) {
            if (attempt == 4) throw;
            for (std::size_t i = 0; i < n; ++i) s.at(i, i) += jitter;
            jitter *= 2.0;  // up to 3 doublings after the first jittered try
        }
    }
    throw NotSpdError("symmetrize: unreachable", 0);
}

}  // namespace dsrc::matcore
