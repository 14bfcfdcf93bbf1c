#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dsrc/eval.hpp"
#include "dsrc/sim.hpp"
#include "dsrc/solvers.hpp"

namespace dsrc::sim {

struct ForwardArtifacts {
    forward::SourceSpace space;
    forward::SensorArray sensors;
    forward::LeadField lead;
};

ForwardArtifacts build_forward(const SimConfig& config,
                               forward::Orientation mode = forward::Orientation::normal);

// Geometry sidecars (JSON) + lead field MatrixFile under `dir`.
void save_forward(const ForwardArtifacts& fa, const std::filesystem::path& dir);
ForwardArtifacts load_forward(const std::filesystem::path& dir);

struct MethodResult {
    std::string method;
    double mse_all = 0.0;
    double mse_active = 0.0;
    int lag_samples = 0;
    // max over k of trace(W_{k|N}) - trace(W_{k|k}); fis row only
    double trace_violation = 0.0;
};

struct CellResult {
    std::size_t snr_index = 0, lambda_index = 0, seed_index = 0;
    double snr = 0.0, lambda = 0.0;
    std::uint64_t noise_seed = 0;
    double sigma = 0.0;
    double runtime_ms = 0.0;
    std::string status = "ok";  // or an error message
    std::vector<MethodResult> methods;
};

struct SweepOptions {
    std::filesystem::path out_dir;
    std::size_t parallelism = 1;
    std::optional<std::uint64_t> seed_override;
    bool keep_checkpoints = false;
    // Test hook: stop (as if killed) after this many newly computed cells.
    std::size_t abort_after_cells = SIZE_MAX;
};

struct SweepSummary {
    std::size_t total_cells = 0;
    std::size_t computed = 0;
    std::size_t resumed = 0;
    std::size_t failed = 0;
};

// Runs every (snr, lambda, seed) cell, writing cell_*.json records
// incrementally; cells whose record already exists are skipped, so an
// interrupted sweep resumes where it stopped. Afterwards call
// consolidate_sweep to produce results.csv, timings.csv and the SVG plots.
SweepSummary run_sweep(const SimConfig& config, const ForwardArtifacts& fa,
                       const SweepOptions& options);

void consolidate_sweep(const SimConfig& config, const std::filesystem::path& out_dir);

std::vector<CellResult> load_cell_results(const SimConfig& config,
                                          const std::filesystem::path& out_dir);

// Per-cell solver pipeline, shared by the sweep and the CLI solve command.
struct CellComputation {
    statespace::RecordingBlock recording;
    double sigma = 0.0;
    solvers::EstimateSeries mne, kf, fis;
    matcore::SpdMatrix obs_noise;
    matcore::SpdMatrix state_noise;
};

CellComputation solve_cell(const SimConfig& config, const ForwardArtifacts& fa,
                           const GroundTruth& truth, double snr, double lambda,
                           std::uint64_t noise_seed, const std::filesystem::path& store_dir);

// Run manifest written next to every command's outputs.
void write_run_manifest(const std::filesystem::path& dir, const std::string& command,
                        std::uint32_t config_hash,
                        const std::vector<std::pair<std::string, double>>& timings,
                        const std::vector<std::filesystem::path>& outputs,
                        const std::vector<std::uint64_t>& seeds);

}  // namespace dsrc::sim
