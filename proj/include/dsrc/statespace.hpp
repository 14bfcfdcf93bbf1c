#pragma once

#include <vector>

#include "dsrc/forward.hpp"
#include "dsrc/matcore.hpp"

namespace dsrc::solvers {
struct EstimateSeries;
}

namespace dsrc::statespace {

// Sensor readings, one column per time step.
struct RecordingBlock {
    matcore::DenseMatrix data;  // S x N, tesla
    double sample_rate = 0.0;   // Hz

    std::size_t channels() const { return data.rows(); }
    std::size_t steps() const { return data.cols(); }
};

enum class TransitionKind { identity, neighbor };

// Full model for the filter/smoother: Y_k = H J_k + eps_k,
// J_k = F J_{k-1} + v_k.
struct StateModel {
    matcore::DenseMatrix H;         // S x P
    matcore::DenseMatrix F;         // P x P
    bool f_is_scalar = true;        // F = f_scale * I, enables cheap updates
    double f_scale = 1.0;
    matcore::SpdMatrix state_noise; // Sigma_w, P x P
    matcore::SpdMatrix obs_noise;   // Sigma_eps, S x S
    std::vector<double> init_mean;  // J_0, length P
    matcore::SpdMatrix init_cov;    // W_0

    std::size_t sources() const { return H.cols(); }
    std::size_t channels() const { return H.rows(); }
    void check_consistent() const;
};

// F = decay * I (mean-reverting random walk) or decay * (I + beta * D^-1 A)
// over the mesh adjacency, beta in [0, 1), decay in (0, 1]. A decay below 1
// pulls unobserved state directions toward zero, keeping the prediction
// covariance bounded over long recordings.
matcore::DenseMatrix build_transition(const forward::SourceSpace& space,
                                      TransitionKind kind, double coupling,
                                      double decay = 1.0);

// Shrunk sample covariance of an empty-room recording:
// (1-gamma) Cov + gamma (trace/S) I.
matcore::SpdMatrix estimate_obs_noise(const RecordingBlock& empty_room, double shrinkage);

// Diagonal Sigma_w from the first differences of a static (MNE) estimate
// series; each variance is multiplied by `scale` and floored at
// `floor_value`. The raw difference variance mixes true signal motion with
// per-frame estimation noise, so a scale below 1 trades tracking speed for
// temporal smoothing.
matcore::SpdMatrix estimate_state_noise(const solvers::EstimateSeries& mne_series,
                                        double floor_value, double scale = 1.0);

// J_0 = first MNE frame, W_0 = Sigma_w.
std::pair<std::vector<double>, matcore::SpdMatrix> init_state(
    const solvers::EstimateSeries& mne_series, const matcore::SpdMatrix& state_noise);

}  // namespace dsrc::statespace
