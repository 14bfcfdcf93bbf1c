#include "dsrc/statespace.hpp"

#include <cmath>
#include <string>

#include "dsrc/solvers.hpp"

namespace dsrc::statespace {

void StateModel::check_consistent() const {
    const std::size_t P = sources();
    const std::size_t S = channels();
    if (F.rows() != P || F.cols() != P)
        throw ContractError("StateModel: F is not P x P");
    if (state_noise.dim() != P)
        throw ContractError("StateModel: Sigma_w dimension mismatch");
    if (obs_noise.dim() != S)
        throw ContractError("StateModel: Sigma_eps dimension mismatch");
    if (init_mean.size() != P)
        throw ContractError("StateModel: J_0 length mismatch");
    if (init_cov.dim() != P)
        throw ContractError("StateModel: W_0 dimension mismatch");
}

matcore::DenseMatrix build_transition(const forward::SourceSpace& space,
                                      TransitionKind kind, double coupling, double decay) {
    const std::size_t P = space.size();
    if (!(decay > 0.0 && decay <= 1.0))
        throw ConfigError("build_transition: decay " + std::to_string(decay) +
                          " outside (0, 1]");
    if (kind == TransitionKind::identity)
        return matcore::scale(matcore::DenseMatrix::identity(P), decay);
    if (!(coupling >= 0.0 && coupling < 1.0))
        throw ConfigError("build_transition: coupling " + std::to_string(coupling) +
                          " outside [0, 1)");
    bool any = false;
    for (auto& nb : space.neighbors) any = any || !nb.empty();
    if (!any) throw ConfigError("build_transition: neighbor kind requires adjacency");

    matcore::DenseMatrix f = matcore::DenseMatrix::identity(P);
    for (std::size_t p = 0; p < P; ++p) {
        const auto& nb = space.neighbors[p];
        if (nb.empty()) continue;
        const double w = coupling / static_cast<double>(nb.size());
        for (std::size_t q : nb) f.at(p, q) += w;
    }
    return matcore::scale(f, decay);
}

matcore::SpdMatrix estimate_obs_noise(const RecordingBlock& empty_room, double shrinkage) {
    if (empty_room.steps() < 2)
        throw ContractError("estimate_obs_noise: need at least 2 samples");
    if (!(shrinkage >= 0.0 && shrinkage <= 1.0))
        throw ConfigError("estimate_obs_noise: shrinkage outside [0, 1]");
    const std::size_t S = empty_room.channels();
    const std::size_t N = empty_room.steps();
    const matcore::DenseMatrix& y = empty_room.data;

    std::vector<double> mean(S, 0.0);
    for (std::size_t s = 0; s < S; ++s) {
        for (std::size_t k = 0; k < N; ++k) mean[s] += y.at(s, k);
        mean[s] /= static_cast<double>(N);
    }
    matcore::DenseMatrix cov(S, S);
    for (std::size_t a = 0; a < S; ++a)
        for (std::size_t b = a; b < S; ++b) {
            double acc = 0.0;
            for (std::size_t k = 0; k < N; ++k)
                acc += (y.at(a, k) - mean[a]) * (y.at(b, k) - mean[b]);
            const double v = acc / static_cast<double>(N - 1);
            cov.at(a, b) = v;
            cov.at(b, a) = v;
        }
    const double iso = cov.trace() / static_cast<double>(S);
    for (std::size_t a = 0; a < S; ++a)
        for (std::size_t b = 0; b < S; ++b) {
            double v = (1.0 - shrinkage) * cov.at(a, b);
            if (a == b) v += shrinkage * iso;
            cov.at(a, b) = v;
        }
    return matcore::SpdMatrix::certify(std::move(cov));
}

namespace {

// Per-vertex sample variance of the first differences of an estimate series.
std::vector<double> diff_variance(const solvers::EstimateSeries& series) {
    const std::size_t N = series.steps();
    const std::size_t P = series.sources();
    if (N < 3)
        throw ContractError("estimate_state_noise: need at least 3 steps, got " +
                            std::to_string(N));
    const matcore::DenseMatrix& j = series.estimates;
    std::vector<double> var(P);
    const std::size_t M = N - 1;
    for (std::size_t p = 0; p < P; ++p) {
        double mean = 0.0;
        for (std::size_t k = 1; k < N; ++k) mean += j.at(p, k) - j.at(p, k - 1);
        mean /= static_cast<double>(M);
        double acc = 0.0;
        for (std::size_t k = 1; k < N; ++k) {
            const double d = j.at(p, k) - j.at(p, k - 1) - mean;
            acc += d * d;
        }
        var[p] = acc / static_cast<double>(M - 1);
    }
    return var;
}

}  // namespace

matcore::SpdMatrix estimate_state_noise(const solvers::EstimateSeries& mne_series,
                                        double floor_value, double scale) {
    if (!(floor_value > 0.0))
        throw ConfigError("estimate_state_noise: floor must be positive");
    if (!(scale > 0.0))
        throw ConfigError("estimate_state_noise: scale must be positive");
    std::vector<double> diag = diff_variance(mne_series);
    for (double& v : diag) v = std::max(floor_value, scale * v);
    return matcore::SpdMatrix::diagonal(diag);
}

std::pair<std::vector<double>, matcore::SpdMatrix> init_state(
    const solvers::EstimateSeries& mne_series, const matcore::SpdMatrix& state_noise) {
    if (mne_series.steps() == 0)
        throw ContractError("init_state: empty estimate series");
    const std::size_t P = mne_series.sources();
    std::vector<double> j0(P);
    for (std::size_t p = 0; p < P; ++p) j0[p] = mne_series.estimates.at(p, 0);
    return {std::move(j0), state_noise};
}

}  // namespace dsrc::statespace
