#include "dsrc/runner.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "dsrc/svgplot.hpp"

namespace dsrc::sim {

using matcore::DenseMatrix;
using matcore::SpdMatrix;
using nlohmann::json;

ForwardArtifacts build_forward(const SimConfig& config, forward::Orientation mode) {
    ForwardArtifacts fa;
    fa.space = forward::build_source_space(config.subdivision_level, config.source_radius,
                                           config.crop);
    fa.sensors = forward::build_sensor_array(config.sensor_count, config.shell_radius,
                                             config.cap_half_angle_deg, config.source_radius);
    fa.lead = forward::lead_field(fa.space, fa.sensors, mode);
    return fa;
}

namespace {

json vec3_to_json(const forward::Vec3& v) { return json::array({v[0], v[1], v[2]}); }

forward::Vec3 vec3_from_json(const json& j) {
    return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

void save_forward(const ForwardArtifacts& fa, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    json geo;
    geo["radius"] = fa.space.radius;
    geo["center"] = vec3_to_json(fa.space.center);
    json verts = json::array(), norms = json::array(), adj = json::array();
    for (std::size_t p = 0; p < fa.space.size(); ++p) {
        verts.push_back(vec3_to_json(fa.space.vertices[p]));
        norms.push_back(vec3_to_json(fa.space.normals[p]));
        adj.push_back(fa.space.neighbors[p]);
    }
    geo["vertices"] = std::move(verts);
    geo["normals"] = std::move(norms);
    geo["neighbors"] = std::move(adj);
    geo["region_labels"] = fa.space.region_labels;
    std::ofstream(dir / "source_space.json", std::ios::trunc) << geo.dump() << "\n";

    json sens;
    json pos = json::array(), ori = json::array();
    for (std::size_t s = 0; s < fa.sensors.size(); ++s) {
        pos.push_back(vec3_to_json(fa.sensors.positions[s]));
        ori.push_back(vec3_to_json(fa.sensors.orientations[s]));
    }
    sens["positions"] = std::move(pos);
    sens["orientations"] = std::move(ori);
    std::ofstream(dir / "sensors.json", std::ios::trunc) << sens.dump() << "\n";

    matfile::write(dir / "leadfield.dsmx", fa.lead.matrix, matfile::Dtype::binary64);
    json meta;
    meta["mode"] = fa.lead.mode == forward::Orientation::normal ? "normal" : "free";
    std::ofstream(dir / "leadfield.json", std::ios::trunc) << meta.dump() << "\n";
}

ForwardArtifacts load_forward(const std::filesystem::path& dir) {
    ForwardArtifacts fa;
    auto parse = [](const std::filesystem::path& p) {
        std::ifstream in(p);
        if (!in) throw ContractError("load_forward: cannot open " + p.string());
        json j;
        try {
            in >> j;
        } catch (const json::exception& e) {
            throw CorruptError("load_forward: bad JSON in " + p.string() + ": " + e.what(), 0);
        }
        return j;
    };
    json geo = parse(dir / "source_space.json");
    fa.space.radius = geo.at("radius").get<double>();
    fa.space.center = vec3_from_json(geo.at("center"));
    for (const auto& v : geo.at("vertices")) fa.space.vertices.push_back(vec3_from_json(v));
    for (const auto& v : geo.at("normals")) fa.space.normals.push_back(vec3_from_json(v));
    for (const auto& a : geo.at("neighbors"))
        fa.space.neighbors.push_back(a.get<std::vector<std::size_t>>());
    fa.space.region_labels = geo.at("region_labels").get<std::vector<int>>();

    json sens = parse(dir / "sensors.json");
    for (const auto& v : sens.at("positions")) fa.sensors.positions.push_back(vec3_from_json(v));
    for (const auto& v : sens.at("orientations"))
        fa.sensors.orientations.push_back(vec3_from_json(v));

    fa.lead.matrix = matfile::read(dir / "leadfield.dsmx");
    json meta = parse(dir / "leadfield.json");
    fa.lead.mode = meta.at("mode").get<std::string>() == "free" ? forward::Orientation::free_triad
                                                                : forward::Orientation::normal;
    return fa;
}

namespace {

// R = (trace(Sigma_eps) / trace(H H^T)) I, the usual depth-agnostic scaling
// that puts lambda H R H^T on the scale of the observation noise at
// lambda ~ 1.
SpdMatrix default_source_prior(const DenseMatrix& h, const SpdMatrix& obs_noise) {
    double tr_hht = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i) tr_hht += h.data()[i] * h.data()[i];
    const double scale = obs_noise.trace() / tr_hht;
    return SpdMatrix::diagonal(std::vector<double>(h.cols(), scale));
}

// Synthetic empty-room recording matching the injected noise process.
statespace::RecordingBlock empty_room_block(const SimConfig& config, const DenseMatrix& h,
                                            double sigma, std::uint64_t seed) {
    const std::size_t S = h.rows();
    const std::size_t M = config.empty_room_steps;
    RandomStream rng(seed);
    statespace::RecordingBlock block;
    block.sample_rate = config.sample_rate;
    if (config.noise_mode == NoiseMode::sensor) {
        block.data = DenseMatrix(S, M);
        for (std::size_t s = 0; s < S; ++s)
            for (std::size_t k = 0; k < M; ++k) block.data.at(s, k) = sigma * rng.gaussian();
    } else {
        DenseMatrix v(h.cols(), M);
        for (std::size_t p = 0; p < h.cols(); ++p)
            for (std::size_t k = 0; k < M; ++k) v.at(p, k) = sigma * rng.gaussian();
        block.data = matcore::gemm_blocked(h, v);
    }
    return block;
}

}  // namespace

CellComputation solve_cell(const SimConfig& config, const ForwardArtifacts& fa,
                           const GroundTruth& truth, double snr, double lambda,
                           std::uint64_t noise_seed, const std::filesystem::path& store_dir) {
    const DenseMatrix& h = fa.lead.matrix;

    NoisyRecording nr = inject_noise(truth, h, snr, config.noise_mode, noise_seed);
    nr.recording.sample_rate = config.sample_rate;

    CellComputation out;
    out.sigma = nr.sigma;
    const std::uint64_t er_seed = RandomStream::derive_seed(noise_seed, 0, 0, 1);
    out.obs_noise = statespace::estimate_obs_noise(
        empty_room_block(config, h, nr.sigma > 0 ? nr.sigma : 1e-15, er_seed),
        config.obs_shrinkage);

    SpdMatrix r = default_source_prior(h, out.obs_noise);
    out.mne = solvers::mne_solve(h, r, out.obs_noise, lambda, nr.recording);

    out.state_noise = statespace::estimate_state_noise(out.mne, config.state_noise_floor,
                                                       config.state_noise_scale);
    auto [j0, w0] = statespace::init_state(out.mne, out.state_noise);

    statespace::StateModel model;
    model.H = h;
    model.F = statespace::build_transition(fa.space, config.transition, config.coupling,
                                           config.transition_decay);
    model.f_is_scalar = config.transition == statespace::TransitionKind::identity;
    model.f_scale = config.transition_decay;
    model.state_noise = out.state_noise;
    model.obs_noise = out.obs_noise;
    model.init_mean = std::move(j0);
    model.init_cov = std::move(w0);

    solvers::CheckpointStore store(store_dir, config.checkpoint_dtype);
    out.kf = solvers::kalman_filter(model, nr.recording, store);
    out.fis = solvers::fis_smooth(model, out.kf, store);

    out.recording = std::move(nr.recording);
    return out;
}

namespace {

std::string cell_name(std::size_t si, std::size_t li, std::size_t ri) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "cell_s%02zu_l%02zu_r%02zu.json", si, li, ri);
    return buf;
}

json cell_to_json(const CellResult& c) {
    json j;
    j["snr_index"] = c.snr_index;
    j["lambda_index"] = c.lambda_index;
    j["seed_index"] = c.seed_index;
    j["snr"] = c.snr;
    j["lambda"] = c.lambda;
    j["noise_seed"] = c.noise_seed;
    j["sigma"] = c.sigma;
    j["runtime_ms"] = c.runtime_ms;
    j["status"] = c.status;
    json methods = json::array();
    for (const auto& m : c.methods) {
        methods.push_back({{"method", m.method},
                           {"mse_all", m.mse_all},
                           {"mse_active", m.mse_active},
                           {"lag_samples", m.lag_samples},
                           {"trace_violation", m.trace_violation}});
    }
    j["methods"] = std::move(methods);
    return j;
}

CellResult cell_from_json(const json& j) {
    CellResult c;
    c.snr_index = j.at("snr_index").get<std::size_t>();
    c.lambda_index = j.at("lambda_index").get<std::size_t>();
    c.seed_index = j.at("seed_index").get<std::size_t>();
    c.snr = j.at("snr").get<double>();
    c.lambda = j.at("lambda").get<double>();
    c.noise_seed = j.at("noise_seed").get<std::uint64_t>();
    c.sigma = j.at("sigma").get<double>();
    c.runtime_ms = j.at("runtime_ms").get<double>();
    c.status = j.at("status").get<std::string>();
    for (const auto& m : j.at("methods")) {
        MethodResult mr;
        mr.method = m.at("method").get<std::string>();
        mr.mse_all = m.at("mse_all").get<double>();
        mr.mse_active = m.at("mse_active").get<double>();
        mr.lag_samples = m.at("lag_samples").get<int>();
        mr.trace_violation = m.at("trace_violation").get<double>();
        c.methods.push_back(std::move(mr));
    }
    return c;
}

}  // namespace

SweepSummary run_sweep(const SimConfig& config, const ForwardArtifacts& fa,
                       const SweepOptions& options) {
    config.validate();
    std::filesystem::create_directories(options.out_dir / "cells");

    const GroundTruth truth = synthesize_sources(config, fa.space);
    const std::uint64_t base_seed = options.seed_override.value_or(config.rng_seed);

    struct Cell {
        std::size_t si, li, ri;
    };
    std::vector<Cell> cells;
    for (std::size_t si = 0; si < config.snr_grid.size(); ++si)
        for (std::size_t li = 0; li < config.lambda_grid.size(); ++li)
            for (std::size_t ri = 0; ri < config.n_seeds; ++ri) cells.push_back({si, li, ri});

    SweepSummary summary;
    summary.total_cells = cells.size();

    std::atomic<std::size_t> next{0};
    std::atomic<std::size_t> computed{0};
    std::atomic<std::size_t> resumed{0};
    std::atomic<std::size_t> failed{0};
    std::atomic<bool> aborted{false};
    std::mutex log_mutex;

    auto worker = [&]() {
        for (;;) {
            const std::size_t idx = next.fetch_add(1);
            if (idx >= cells.size() || aborted.load()) return;
            const Cell cell = cells[idx];
            const auto path = options.out_dir / "cells" / cell_name(cell.si, cell.li, cell.ri);

            if (std::filesystem::exists(path)) {
                try {
                    std::ifstream in(path);
                    json j;
                    in >> j;
                    cell_from_json(j);
                    resumed.fetch_add(1);
                    continue;  // complete record, skip
                } catch (...) {
                    // partial record from an interrupted run; recompute
                }
            }
            if (computed.load() >= options.abort_after_cells) {
                aborted.store(true);
                return;
            }

            CellResult result;
            result.snr_index = cell.si;
            result.lambda_index = cell.li;
            result.seed_index = cell.ri;
            result.snr = config.snr_grid[cell.si];
            result.lambda = config.lambda_grid[cell.li];
            result.noise_seed = RandomStream::derive_seed(base_seed, cell.si, cell.ri, 0);

            const auto store_dir =
                options.out_dir / "stores" /
                ("s" + std::to_string(cell.si) + "_l" + std::to_string(cell.li) + "_r" +
                 std::to_string(cell.ri));
            const auto t0 = std::chrono::steady_clock::now();
            try {
                CellComputation comp = solve_cell(config, fa, truth, result.snr, result.lambda,
                                                  result.noise_seed, store_dir);
                result.sigma = comp.sigma;
                const std::size_t peak = eval::peak_response_vertex(comp.mne, truth.active_mask);
                for (const auto* series : {&comp.mne, &comp.kf, &comp.fis}) {
                    MethodResult mr;
                    mr.method = solvers::method_name(series->method);
                    eval::MseReport rep = eval::mse_report(*series, truth);
                    mr.mse_all = rep.mean_all;
                    mr.mse_active = rep.mean_active;
                    mr.lag_samples = eval::lag_estimate(*series, truth.j_true, peak);
                    if (series->method == solvers::Method::fis) {
                        double viol = -1e300;
                        for (std::size_t k = 0; k < comp.fis.cov_traces.size(); ++k)
                            viol = std::max(viol,
                                            comp.fis.cov_traces[k] - comp.kf.cov_traces[k]);
                        mr.trace_violation = viol;
                    }
                    result.methods.push_back(std::move(mr));
                }
            } catch (const std::exception& e) {
                result.status = e.what();
                failed.fetch_add(1);
            }
            result.runtime_ms = std::chrono::duration<double, std::milli>(
                                    std::chrono::steady_clock::now() - t0)
                                    .count();
            if (!options.keep_checkpoints)
                std::filesystem::remove_all(store_dir);

            const auto tmp = path.string() + ".tmp";
            std::ofstream(tmp, std::ios::trunc) << cell_to_json(result).dump(1) << "\n";
            std::filesystem::rename(tmp, path);
            computed.fetch_add(1);
            {
                std::lock_guard<std::mutex> lock(log_mutex);
                std::printf("[sweep] cell snr=%g lambda=%g seed=%zu %s (%.0f ms)\n",
                            result.snr, result.lambda, cell.ri,
                            result.status == "ok" ? "ok" : "FAILED", result.runtime_ms);
                std::fflush(stdout);
            }
        }
    };

    const std::size_t n_threads = std::max<std::size_t>(1, options.parallelism);
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t i = 0; i < n_threads; ++i) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    summary.computed = computed.load();
    summary.resumed = resumed.load();
    summary.failed = failed.load();
    if (!aborted.load()) consolidate_sweep(config, options.out_dir);
    return summary;
}

std::vector<CellResult> load_cell_results(const SimConfig& config,
                                          const std::filesystem::path& out_dir) {
    std::vector<CellResult> results;
    for (std::size_t si = 0; si < config.snr_grid.size(); ++si)
        for (std::size_t li = 0; li < config.lambda_grid.size(); ++li)
            for (std::size_t ri = 0; ri < config.n_seeds; ++ri) {
                const auto path = out_dir / "cells" / cell_name(si, li, ri);
                std::ifstream in(path);
                if (!in)
                    throw ContractError("sweep: missing cell record " + path.string());
                json j;
                try {
                    in >> j;
                    results.push_back(cell_from_json(j));
                } catch (const json::exception& e) {
                    throw CorruptError("sweep: bad cell record " + path.string() + ": " +
                                           e.what(), 0);
                }
            }
    return results;
}

void consolidate_sweep(const SimConfig& config, const std::filesystem::path& out_dir) {
    const std::vector<CellResult> results = load_cell_results(config, out_dir);

    // results.csv holds only run-invariant values so that repeat runs with
    // the same seed are byte-identical; wall-clock timings go to
    // timings.csv.
    std::ofstream csv(out_dir / "results.csv", std::ios::trunc);
    csv << "method,snr,lambda,seed,mse_all,mse_active,lag_samples\n";
    std::ofstream times(out_dir / "timings.csv", std::ios::trunc);
    times << "snr,lambda,seed,runtime_ms\n";
    for (const auto& c : results) {
        times << fmt_double(c.snr) << "," << fmt_double(c.lambda) << "," << c.seed_index << ","
              << c.runtime_ms << "\n";
        if (c.status != "ok") continue;
        for (const auto& m : c.methods) {
            csv << m.method << "," << fmt_double(c.snr) << "," << fmt_double(c.lambda) << ","
                << c.seed_index << "," << fmt_double(m.mse_all) << ","
                << fmt_double(m.mse_active) << "," << m.lag_samples << "\n";
        }
    }
    csv.close();
    times.close();

    // Seed-averaged MSE-vs-SNR plots, one per lambda and scope.
    std::filesystem::create_directories(out_dir / "plots");
    const std::vector<std::pair<std::string, std::string>> method_colors = {
        {"mne", "#1f77b4"}, {"kf", "#d62728"}, {"fis", "#2ca02c"}};
    for (std::size_t li = 0; li < config.lambda_grid.size(); ++li) {
        for (const bool active : {true, false}) {
            std::vector<svgplot::Series> series;
            for (const auto& [method, color] : method_colors) {
                svgplot::Series s;
                s.label = method;
                s.color = color;
                for (std::size_t si = 0; si < config.snr_grid.size(); ++si) {
                    double sum = 0.0;
                    std::size_t n = 0;
                    for (const auto& c : results) {
                        if (c.snr_index != si || c.lambda_index != li || c.status != "ok")
                            continue;
                        for (const auto& m : c.methods)
                            if (m.method == method) {
                                sum += active ? m.mse_active : m.mse_all;
                                ++n;
                            }
                    }
                    if (n) {
                        s.x.push_back(config.snr_grid[si]);
                        s.y.push_back(sum / static_cast<double>(n));
                    }
                }
                series.push_back(std::move(s));
            }
            char name[64];
            std::snprintf(name, sizeof(name), "mse_%s_lambda_%g.svg",
                          active ? "active" : "all", config.lambda_grid[li]);
            svgplot::write_line_plot(out_dir / "plots" / name,
                            std::string("MSE vs SNR (") + (active ? "active" : "all") +
                                " vertices, lambda=" + fmt_double(config.lambda_grid[li]) + ")",
                            "SNR", "mean MSE", series, true);
        }
    }
}

void write_run_manifest(const std::filesystem::path& dir, const std::string& command,
                        std::uint32_t config_hash,
                        const std::vector<std::pair<std::string, double>>& timings,
                        const std::vector<std::filesystem::path>& outputs,
                        const std::vector<std::uint64_t>& seeds) {
    json j;
    j["command"] = command;
    j["artifact_version"] = "1.0.0";
    j["config_hash"] = config_hash;
    json t = json::object();
    for (const auto& [name, ms] : timings) t[name] = ms;
    j["stage_timings_ms"] = std::move(t);
    json outs = json::array();
    for (const auto& p : outputs) {
        outs.push_back({{"path", p.string()},
                        {"crc32", matfile::crc32_file(p)},
                        {"bytes", std::filesystem::file_size(p)}});
    }
    j["outputs"] = std::move(outs);
    j["rng_seeds"] = seeds;
    std::ofstream(dir / "run_manifest.json", std::ios::trunc) << j.dump(1) << "\n";
}

}  // namespace dsrc::sim
