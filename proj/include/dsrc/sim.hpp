#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "dsrc/forward.hpp"
#include "dsrc/matcore.hpp"
#include "dsrc/matfile.hpp"
#include "dsrc/statespace.hpp"

namespace dsrc::sim {

// Deterministic stream of standard normal draws: mt19937_64 (whose output
// sequence the standard pins down exactly) plus an explicit Box-Muller
// transform, since std::normal_distribution is implementation-defined and
// would break the bit-for-bit reproducibility contract.
class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed) : engine_(seed) {}
    double uniform();  // in (0, 1)
    double gaussian();

    // Derives an independent seed for a named purpose and cell indices
    // (splitmix64 mixing).
    static std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a,
                                     std::uint64_t b, std::uint64_t c);

private:
    std::mt19937_64 engine_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

enum class NoiseMode { sensor, source };

struct RegionSpec {
    std::size_t seed_vertex = 0;
    std::size_t target_count = 0;
};

struct SimConfig {
    // Geometry.
    int subdivision_level = 3;
    forward::Crop crop = forward::Crop::hemisphere;
    double source_radius = 0.08;
    std::size_t sensor_count = 64;
    double shell_radius = 0.10;
    double cap_half_angle_deg = 90.0;

    // Signal.
    std::vector<RegionSpec> regions;
    double sample_rate = 600.0;
    std::size_t n_steps = 120;
    std::vector<double> carrier_hz = {10.0, 20.0};
    double envelope_hz = 0.4;

    // Sweep.
    std::vector<double> snr_grid = {1.0};
    std::vector<double> lambda_grid = {1.0};
    std::size_t n_seeds = 1;
    NoiseMode noise_mode = NoiseMode::sensor;
    std::uint64_t rng_seed = 1;

    // Model estimation knobs.
    double obs_shrinkage = 0.05;
    double state_noise_floor = 1e-30;
    double state_noise_scale = 1.0;
    std::size_t empty_room_steps = 400;
    statespace::TransitionKind transition = statespace::TransitionKind::identity;
    double coupling = 0.0;
    // Mean-reversion factor of the state transition; 1 is a pure random
    // walk, below 1 the prior pulls each source toward zero and the
    // prediction covariance stays bounded over long recordings.
    double transition_decay = 0.95;
    matfile::Dtype checkpoint_dtype = matfile::Dtype::binary32;

    void validate() const;

    static SimConfig from_json_file(const std::filesystem::path& path);
    std::string to_json() const;
};

struct GroundTruth {
    matcore::DenseMatrix j_true;    // P x N
    std::vector<bool> active_mask;  // length P
    std::vector<int> region_ids;    // length P, -1 = inactive
};

// Active regions grown breadth-first from each seed vertex (index-ascending
// tie-breaking); every active vertex carries the common envelope-modulated
// carrier mixture at unit amplitude.
GroundTruth synthesize_sources(const SimConfig& config, const forward::SourceSpace& space);

struct NoisyRecording {
    statespace::RecordingBlock recording;
    double sigma = 0.0;  // per-sample noise standard deviation actually used
};

// Calibrates the noise level so that the sensor-space signal-to-noise
// ratio equals `snr`, then draws Gaussian noise from `seed`.
NoisyRecording inject_noise(const GroundTruth& truth, const matcore::DenseMatrix& H,
                            double snr, NoiseMode mode, std::uint64_t seed);

}  // namespace dsrc::sim
