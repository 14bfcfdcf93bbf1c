#include "dsrc/eval.hpp"

#include <cmath>
#include <cstdlib>
#include <string>

#include "dsrc/sim.hpp"

namespace dsrc::eval {

std::vector<double> mse_map(const solvers::EstimateSeries& estimate,
                            const matcore::DenseMatrix& truth) {
    const std::size_t P = estimate.sources();
    const std::size_t N = estimate.steps();
    if (truth.rows() != P || truth.cols() != N)
        throw ContractError("mse_map: estimate is " + std::to_string(P) + "x" +
                            std::to_string(N) + " but truth is " +
                            std::to_string(truth.rows()) + "x" + std::to_string(truth.cols()));
    std::vector<double> mse(P, 0.0);
    for (std::size_t p = 0; p < P; ++p) {
        double acc = 0.0;
        for (std::size_t k = 0; k < N; ++k) {
            const double d = estimate.estimates.at(p, k) - truth.at(p, k);
            acc += d * d;
        }
        mse[p] = acc / static_cast<double>(N);
    }
    return mse;
}

MseReport mse_report(const solvers::EstimateSeries& estimate, const sim::GroundTruth& truth) {
    MseReport r;
    r.per_vertex_mse = mse_map(estimate, truth.j_true);
    double sum_all = 0.0, sum_active = 0.0;
    std::size_t n_active = 0;
    for (std::size_t p = 0; p < r.per_vertex_mse.size(); ++p) {
        sum_all += r.per_vertex_mse[p];
        if (truth.active_mask[p]) {
            sum_active += r.per_vertex_mse[p];
            ++n_active;
        }
    }
    r.mean_all = sum_all / static_cast<double>(r.per_vertex_mse.size());
    r.mean_active = n_active ? sum_active / static_cast<double>(n_active) : 0.0;
    return r;
}

double relative_mse_change(const MseReport& report, const MseReport& baseline, Scope scope) {
    if (report.per_vertex_mse.size() != baseline.per_vertex_mse.size())
        throw ContractError("relative_mse_change: geometry mismatch");
    const double b = scope == Scope::all ? baseline.mean_all : baseline.mean_active;
    const double m = scope == Scope::all ? report.mean_all : report.mean_active;
    if (b == 0.0)
        throw ContractError("relative_mse_change: baseline mean is zero");
    return 100.0 * (m - b) / b;
}

namespace {

// Pearson correlation of est[t] against truth[t - shift] over the overlap.
double shifted_correlation(const double* est, const double* tru, std::size_t n, int shift) {
    const std::size_t lo = shift > 0 ? static_cast<std::size_t>(shift) : 0;
    const std::size_t hi = shift < 0 ? n - static_cast<std::size_t>(-shift) : n;
    const std::size_t m = hi - lo;
    double me = 0.0, mt = 0.0;
    for (std::size_t t = lo; t < hi; ++t) {
        me += est[t];
        mt += tru[t - shift];
    }
    me /= static_cast<double>(m);
    mt /= static_cast<double>(m);
    double see = 0.0, stt = 0.0, set = 0.0;
    for (std::size_t t = lo; t < hi; ++t) {
        const double a = est[t] - me;
        const double b = tru[t - shift] - mt;
        see += a * a;
        stt += b * b;
        set += a * b;
    }
    if (!(see > 0.0) || !(stt > 0.0))
        throw ContractError("lag_estimate: zero-variance series in overlap window");
    return set / std::sqrt(see * stt);
}

}  // namespace

int lag_estimate(const solvers::EstimateSeries& estimate, const matcore::DenseMatrix& truth,
                 std::size_t vertex) {
    const std::size_t N = estimate.steps();
    if (N < 16) throw ContractError("lag_estimate: need at least 16 samples");
    if (vertex >= estimate.sources() || truth.rows() != estimate.sources() ||
        truth.cols() != N)
        throw ContractError("lag_estimate: dimension mismatch");

    std::vector<double> est(N), tru(N);
    for (std::size_t k = 0; k < N; ++k) {
        est[k] = estimate.estimates.at(vertex, k);
        tru[k] = truth.at(vertex, k);
    }
    const int window = static_cast<int>(N / 4);
    int best_shift = 0;
    double best = shifted_correlation(est.data(), tru.data(), N, 0);
    // Scan by increasing |shift| so ties resolve toward zero.
    for (int mag = 1; mag <= window; ++mag) {
        for (int shift : {mag, -mag}) {
            const double c = shifted_correlation(est.data(), tru.data(), N, shift);
            if (c > best) {
                best = c;
                best_shift = shift;
            }
        }
    }
    return best_shift;
}

std::size_t peak_response_vertex(const solvers::EstimateSeries& mne,
                                 const std::vector<bool>& active_mask) {
    if (active_mask.size() != mne.sources())
        throw ContractError("peak_response_vertex: mask length mismatch");
    std::size_t best = SIZE_MAX;
    double best_peak = -1.0;
    for (std::size_t p = 0; p < mne.sources(); ++p) {
        if (!active_mask[p]) continue;
        double peak = 0.0;
        for (std::size_t k = 0; k < mne.steps(); ++k)
            peak = std::max(peak, std::fabs(mne.estimates.at(p, k)));
        if (peak > best_peak) {
            best_peak = peak;
            best = p;
        }
    }
    if (best == SIZE_MAX)
        throw ContractError("peak_response_vertex: no active vertices");
    return best;
}

}  // namespace dsrc::eval
