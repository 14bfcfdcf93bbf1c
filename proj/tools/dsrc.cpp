#include <chrono>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dsrc/runner.hpp"

namespace {

using namespace dsrc;

std::uint32_t hash_file(const std::filesystem::path& p) { return matfile::crc32_file(p); }

double ms_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
        .count();
}

int cmd_forward(const std::string& config_path, const std::string& out_dir) {
    const auto t0 = std::chrono::steady_clock::now();
    sim::SimConfig config = sim::SimConfig::from_json_file(config_path);
    sim::ForwardArtifacts fa = sim::build_forward(config);
    std::filesystem::create_directories(out_dir);
    sim::save_forward(fa, out_dir);
    std::vector<std::filesystem::path> outputs = {
        std::filesystem::path(out_dir) / "source_space.json",
        std::filesystem::path(out_dir) / "sensors.json",
        std::filesystem::path(out_dir) / "leadfield.dsmx",
        std::filesystem::path(out_dir) / "leadfield.json"};
    sim::write_run_manifest(out_dir, "forward", hash_file(config_path),
                            {{"forward", ms_since(t0)}}, outputs, {});
    std::printf("forward: %zu sources, %zu sensors, lead field %zux%zu -> %s\n",
                fa.space.size(), fa.sensors.size(), fa.lead.matrix.rows(),
                fa.lead.matrix.cols(), out_dir.c_str());
    return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& out_dir,
              std::size_t parallelism, std::int64_t seed_override) {
    const auto t0 = std::chrono::steady_clock::now();
    sim::SimConfig config = sim::SimConfig::from_json_file(config_path);

    const auto fwd_dir = std::filesystem::path(out_dir) / "forward";
    sim::ForwardArtifacts fa;
    if (std::filesystem::exists(fwd_dir / "leadfield.dsmx")) {
        fa = sim::load_forward(fwd_dir);
    } else {
        fa = sim::build_forward(config);
        sim::save_forward(fa, fwd_dir);
    }
    const double forward_ms = ms_since(t0);

    sim::SweepOptions options;
    options.out_dir = out_dir;
    options.parallelism = parallelism;
    if (seed_override >= 0)
        options.seed_override = static_cast<std::uint64_t>(seed_override);
    sim::SweepSummary summary = sim::run_sweep(config, fa, options);

    std::vector<std::filesystem::path> outputs = {
        std::filesystem::path(out_dir) / "results.csv",
        std::filesystem::path(out_dir) / "timings.csv"};
    sim::write_run_manifest(out_dir, "sweep", hash_file(config_path),
                            {{"forward", forward_ms}, {"total", ms_since(t0)}}, outputs,
                            {options.seed_override.value_or(config.rng_seed)});
    std::printf("sweep: %zu cells (%zu computed, %zu resumed, %zu failed) -> %s\n",
                summary.total_cells, summary.computed, summary.resumed, summary.failed,
                out_dir.c_str());
    return summary.failed == summary.total_cells && summary.total_cells > 0 ? 3 : 0;
}

int cmd_solve(const std::string& config_path, const std::string& recording_path,
              const std::string& method, const std::string& out_dir) {
    const auto t0 = std::chrono::steady_clock::now();
    sim::SimConfig config = sim::SimConfig::from_json_file(config_path);
    if (method != "mne" && method != "kf" && method != "fis")
        throw ConfigError("solve: method must be one of mne, kf, fis");

    const auto fwd_dir = std::filesystem::path(out_dir) / "forward";
    sim::ForwardArtifacts fa;
    if (std::filesystem::exists(fwd_dir / "leadfield.dsmx")) {
        fa = sim::load_forward(fwd_dir);
    } else {
        fa = sim::build_forward(config);
        std::filesystem::create_directories(out_dir);
        sim::save_forward(fa, fwd_dir);
    }

    statespace::RecordingBlock recording;
    recording.data = matfile::read(recording_path);
    recording.sample_rate = config.sample_rate;
    if (recording.data.rows() != fa.lead.matrix.rows())
        throw ConfigError("solve: recording has " + std::to_string(recording.data.rows()) +
                          " channels but the lead field has " +
                          std::to_string(fa.lead.matrix.rows()));

    const double lambda = config.lambda_grid.front();
    // With no empty-room data supplied, the observation covariance is the
    // shrunk sample covariance of the recording itself.
    matcore::SpdMatrix obs_noise =
        statespace::estimate_obs_noise(recording, std::max(config.obs_shrinkage, 0.05));
    double tr_hht = 0.0;
    const auto& h = fa.lead.matrix;
    for (std::size_t i = 0; i < h.size(); ++i) tr_hht += h.data()[i] * h.data()[i];
    matcore::SpdMatrix r = matcore::SpdMatrix::diagonal(
        std::vector<double>(h.cols(), obs_noise.trace() / tr_hht));

    solvers::EstimateSeries mne = solvers::mne_solve(h, r, obs_noise, lambda, recording);
    solvers::EstimateSeries result = mne;

    if (method != "mne") {
        statespace::StateModel model;
        model.H = h;
        model.F = statespace::build_transition(fa.space, config.transition, config.coupling,
                                               config.transition_decay);
        model.f_is_scalar = config.transition == statespace::TransitionKind::identity;
        model.f_scale = config.transition_decay;
        model.state_noise = statespace::estimate_state_noise(mne, config.state_noise_floor,
                                                             config.state_noise_scale);
        model.obs_noise = obs_noise;
        auto [j0, w0] = statespace::init_state(mne, model.state_noise);
        model.init_mean = std::move(j0);
        model.init_cov = std::move(w0);

        solvers::CheckpointStore store(std::filesystem::path(out_dir) / "store",
                                       config.checkpoint_dtype);
        solvers::EstimateSeries kf = solvers::kalman_filter(model, recording, store);
        result = method == "kf" ? kf : solvers::fis_smooth(model, kf, store);
    }

    std::filesystem::create_directories(out_dir);
    const auto est_path = std::filesystem::path(out_dir) / ("estimates_" + method + ".dsmx");
    matfile::write(est_path, result.estimates, matfile::Dtype::binary64);
    nlohmann::json logs;
    logs["method"] = method;
    logs["lambda"] = lambda;
    logs["innovation_norms"] = result.innovation_norms;
    logs["cov_traces"] = result.cov_traces;
    const auto log_path = std::filesystem::path(out_dir) / ("logs_" + method + ".json");
    std::ofstream(log_path, std::ios::trunc) << logs.dump(1) << "\n";

    sim::write_run_manifest(out_dir, "solve", hash_file(config_path),
                            {{"total", ms_since(t0)}}, {est_path, log_path}, {});
    std::printf("solve: %s estimates %zux%zu -> %s\n", method.c_str(), result.sources(),
                result.steps(), est_path.string().c_str());
    return 0;
}

int cmd_report(const std::string& config_path, const std::string& out_dir) {
    sim::SimConfig config = sim::SimConfig::from_json_file(config_path);
    sim::consolidate_sweep(config, out_dir);
    std::printf("report: rebuilt results.csv and plots in %s\n", out_dir.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dynamic electromagnetic source localization: MNE, Kalman filter and "
                 "fixed-interval smoother with a simulation sweep harness"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "out", recording_path, method = "mne";
    std::size_t parallelism = 1;
    std::int64_t seed_override = -1;

    auto* fwd = app.add_subcommand("forward", "Build geometry and lead field artifacts");
    fwd->add_option("--config", config_path, "JSON config file")->required();
    fwd->add_option("--out", out_dir, "Output directory");

    auto* sweep = app.add_subcommand("sweep", "Run the (method x SNR x lambda) sweep");
    sweep->add_option("--config", config_path, "JSON config file")->required();
    sweep->add_option("--out", out_dir, "Output directory");
    sweep->add_option("--parallelism", parallelism, "Concurrent sweep cells");
    sweep->add_option("--seed-override", seed_override, "Override the config rng_seed");

    auto* solve = app.add_subcommand("solve", "Solve an externally supplied recording");
    solve->add_option("--config", config_path, "JSON config file")->required();
    solve->add_option("--recording", recording_path, "Recording MatrixFile (S x N)")
        ->required();
    solve->add_option("--method", method, "mne | kf | fis");
    solve->add_option("--out", out_dir, "Output directory");

    auto* report = app.add_subcommand("report", "Rebuild CSV and plots from sweep records");
    report->add_option("--config", config_path, "JSON config file")->required();
    report->add_option("--out", out_dir, "Sweep output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (fwd->parsed()) return cmd_forward(config_path, out_dir);
        if (sweep->parsed()) return cmd_sweep(config_path, out_dir, parallelism, seed_override);
        if (solve->parsed()) return cmd_solve(config_path, recording_path, method, out_dir);
        if (report->parsed()) return cmd_report(config_path, out_dir);
    } catch (const dsrc::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const dsrc::ContractError& e) {
        std::fprintf(stderr, "contract error: %s\n", e.what());
        return 2;
    } catch (const dsrc::CorruptError& e) {
        std::fprintf(stderr, "corrupt data: %s (byte offset %zu)\n", e.what(), e.byte_offset);
        return 4;
    } catch (const dsrc::NotSpdError& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 3;
    } catch (const dsrc::SolverError& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
