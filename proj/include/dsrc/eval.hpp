#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "dsrc/matcore.hpp"
#include "dsrc/solvers.hpp"

namespace dsrc::sim {
struct GroundTruth;
}

namespace dsrc::eval {

struct MseReport {
    std::vector<double> per_vertex_mse;
    double mean_all = 0.0;
    double mean_active = 0.0;
};

// Per-vertex time-averaged squared error between estimate and truth.
std::vector<double> mse_map(const solvers::EstimateSeries& estimate,
                            const matcore::DenseMatrix& truth);

MseReport mse_report(const solvers::EstimateSeries& estimate, const sim::GroundTruth& truth);

enum class Scope { all, active };

// 100 * (mean - baseline_mean) / baseline_mean for the chosen scope.
double relative_mse_change(const MseReport& report, const MseReport& baseline, Scope scope);

// Lag (in samples) maximizing the normalized cross-correlation between the
// estimated and true time courses at `vertex`, over shifts in [-N/4, N/4].
// Positive lag means the estimate trails the truth; ties break toward 0.
int lag_estimate(const solvers::EstimateSeries& estimate, const matcore::DenseMatrix& truth,
                 std::size_t vertex);

// Vertex used for trace diagnostics: argmax over active vertices of the MNE
// series' peak absolute value, lowest index on ties.
std::size_t peak_response_vertex(const solvers::EstimateSeries& mne,
                                 const std::vector<bool>& active_mask);

}  // namespace dsrc::eval
