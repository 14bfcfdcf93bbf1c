#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dsrc/matcore.hpp"
#include "dsrc/matfile.hpp"
#include "dsrc/statespace.hpp"

namespace dsrc::solvers {

enum class Method { mne, kf, fis, batch };

const char* method_name(Method m);

// P x N trajectory of source estimates with per-step diagnostics.
struct EstimateSeries {
    matcore::DenseMatrix estimates;        // P x N
    Method method = Method::mne;
    std::vector<double> innovation_norms;  // filter only, length N
    std::vector<double> cov_traces;        // trace(W_{k|k}) or trace(W_{k|N}), length N

    std::size_t sources() const { return estimates.rows(); }
    std::size_t steps() const { return estimates.cols(); }
};

// On-disk sequence of predicted/updated filter covariances. Layout:
//   <dir>/manifest.json   {n_steps, dim, dtype, files: {name: crc32}}
//   <dir>/pred_0000.dsmx ... upd_NNNN.dsmx
class CheckpointStore {
public:
    CheckpointStore(std::filesystem::path dir,
                    matfile::Dtype dtype = matfile::Dtype::binary32);

    const std::filesystem::path& dir() const { return dir_; }
    matfile::Dtype dtype() const { return dtype_; }

    // Forward-pass writer interface.
    void begin(std::size_t n_steps, std::size_t dim);
    void put(const char* kind, std::size_t step, const matcore::DenseMatrix& m);
    void finish();

    // Backward-pass reader interface; verifies the manifest and per-file
    // checksums, throwing CorruptError on mismatch.
    void open_for_read(std::size_t expected_dim);
    std::size_t n_steps() const { return n_steps_; }
    matcore::DenseMatrix get(const char* kind, std::size_t step) const;

private:
    std::filesystem::path file_for(const char* kind, std::size_t step) const;

    std::filesystem::path dir_;
    matfile::Dtype dtype_;
    std::size_t n_steps_ = 0;
    std::size_t dim_ = 0;
    std::vector<std::pair<std::string, std::uint32_t>> checksums_;
};

// Static minimum-norm estimate: J_k = lambda R H^T (lambda H R H^T +
// Sigma_eps)^-1 Y_k, one Cholesky shared across all frames.
EstimateSeries mne_solve(const matcore::DenseMatrix& H, const matcore::SpdMatrix& R,
                         const matcore::SpdMatrix& obs_noise, double lambda,
                         const statespace::RecordingBlock& Y);

// Forward Kalman pass; writes predicted and updated covariances to `store`
// at every step. Throws SolverError with the failing step index if an
// innovation covariance cannot be kept SPD.
EstimateSeries kalman_filter(const statespace::StateModel& model,
                             const statespace::RecordingBlock& Y, CheckpointStore& store);

// RTS backward pass over the stored filter covariances, seeded at k = N
// from the filter's final frame.
EstimateSeries fis_smooth(const statespace::StateModel& model,
                          const EstimateSeries& filter_out, CheckpointStore& store);

// Independent oracle: stacks all states into one joint Gaussian and solves
// the dense MAP normal equations. Guarded to P*N <= 5000.
EstimateSeries batch_map_oracle(const statespace::StateModel& model,
                                const statespace::RecordingBlock& Y);

}  // namespace dsrc::solvers
