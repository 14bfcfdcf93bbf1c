#include "dsrc/sim.hpp"

#include <cmath>
#include <deque>
#include <fstream>
#include <set>
#include <string>

#include <json.hpp>

namespace dsrc::sim {

double RandomStream::uniform() {
    // 53-bit mantissa draw in (0, 1); never returns 0 exactly.
    const std::uint64_t u = engine_();
    return (static_cast<double>(u >> 11) + 0.5) * 0x1.0p-53;
}

double RandomStream::gaussian() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
}

std::uint64_t RandomStream::derive_seed(std::uint64_t base, std::uint64_t a,
                                        std::uint64_t b, std::uint64_t c) {
    auto mix = [](std::uint64_t x) {
        x += 0x9E3779B97F4A7C15ull;
        x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
        x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
        return x ^ (x >> 31);
    };
    return mix(mix(mix(mix(base) + a) + b) + c);
}

void SimConfig::validate() const {
    if (subdivision_level < 0 || subdivision_level > 6)
        throw ConfigError("config: subdivision_level outside [0, 6]");
    if (sensor_count < 1) throw ConfigError("config: sensor_count must be >= 1");
    if (!(shell_radius > source_radius))
        throw ConfigError("config: shell_radius must exceed source_radius");
    if (n_steps < 2) throw ConfigError("config: n_steps must be >= 2");
    if (!(sample_rate > 0.0)) throw ConfigError("config: sample_rate must be positive");
    for (double f : carrier_hz)
        if (!(f < sample_rate / 2.0))
            throw ConfigError("config: carrier frequency " + std::to_string(f) +
                              " at or above Nyquist");
    if (!(envelope_hz < sample_rate / 2.0))
        throw ConfigError("config: envelope frequency at or above Nyquist");
    if (snr_grid.empty()) throw ConfigError("config: snr_grid is empty");
    for (double s : snr_grid)
        if (!(s > 0.0)) throw ConfigError("config: snr values must be positive");
    if (lambda_grid.empty()) throw ConfigError("config: lambda_grid is empty");
    for (double l : lambda_grid)
        if (!(l > 0.0)) throw ConfigError("config: lambda values must be positive");
    if (n_seeds < 1) throw ConfigError("config: n_seeds must be >= 1");
    if (regions.empty()) throw ConfigError("config: no active regions specified");
    if (empty_room_steps < 2) throw ConfigError("config: empty_room_steps must be >= 2");
    if (!(obs_shrinkage >= 0.0 && obs_shrinkage <= 1.0))
        throw ConfigError("config: obs_shrinkage outside [0, 1]");
    if (!(state_noise_scale > 0.0))
        throw ConfigError("config: state_noise_scale must be positive");
    if (!(transition_decay > 0.0 && transition_decay <= 1.0))
        throw ConfigError("config: transition_decay outside (0, 1]");
    if (!(coupling >= 0.0 && coupling < 1.0))
        throw ConfigError("config: coupling outside [0, 1)");
}

namespace {

using nlohmann::json;

template <typename T>
T require(const json& j, const char* field) {
    if (!j.contains(field))
        throw ConfigError(std::string("config: missing required field '") + field + "'");
    try {
        return j.at(field).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(std::string("config: field '") + field + "' has the wrong type");
    }
}

template <typename T>
void optional_get(const json& j, const char* field, T& out) {
    if (!j.contains(field)) return;
    try {
        out = j.at(field).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(std::string("config: field '") + field + "' has the wrong type");
    }
}

}  // namespace

SimConfig SimConfig::from_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("config: invalid JSON in " + path.string() + ": " + e.what());
    }

    SimConfig c;
    c.subdivision_level = require<int>(j, "subdivision_level");
    c.sensor_count = require<std::size_t>(j, "sensor_count");
    c.n_steps = require<std::size_t>(j, "n_steps");

    std::string crop = "hemisphere";
    optional_get(j, "crop", crop);
    if (crop == "none") c.crop = forward::Crop::none;
    else if (crop == "hemisphere") c.crop = forward::Crop::hemisphere;
    else throw ConfigError("config: crop must be 'none' or 'hemisphere'");

    optional_get(j, "source_radius", c.source_radius);
    optional_get(j, "shell_radius", c.shell_radius);
    optional_get(j, "cap_half_angle_deg", c.cap_half_angle_deg);
    optional_get(j, "sample_rate", c.sample_rate);
    optional_get(j, "carrier_hz", c.carrier_hz);
    optional_get(j, "envelope_hz", c.envelope_hz);
    optional_get(j, "snr_grid", c.snr_grid);
    optional_get(j, "lambda_grid", c.lambda_grid);
    optional_get(j, "n_seeds", c.n_seeds);
    optional_get(j, "rng_seed", c.rng_seed);
    optional_get(j, "obs_shrinkage", c.obs_shrinkage);
    optional_get(j, "state_noise_floor", c.state_noise_floor);
    optional_get(j, "state_noise_scale", c.state_noise_scale);
    optional_get(j, "empty_room_steps", c.empty_room_steps);
    optional_get(j, "coupling", c.coupling);
    optional_get(j, "transition_decay", c.transition_decay);

    std::string mode = "sensor";
    optional_get(j, "noise_mode", mode);
    if (mode == "sensor") c.noise_mode = NoiseMode::sensor;
    else if (mode == "source") c.noise_mode = NoiseMode::source;
    else throw ConfigError("config: noise_mode must be 'sensor' or 'source'");

    std::string trans = "identity";
    optional_get(j, "transition", trans);
    if (trans == "identity") c.transition = statespace::TransitionKind::identity;
    else if (trans == "neighbor") c.transition = statespace::TransitionKind::neighbor;
    else throw ConfigError("config: transition must be 'identity' or 'neighbor'");

    std::string dtype = "binary32";
    optional_get(j, "checkpoint_dtype", dtype);
    if (dtype == "binary32") c.checkpoint_dtype = matfile::Dtype::binary32;
    else if (dtype == "binary64") c.checkpoint_dtype = matfile::Dtype::binary64;
    else throw ConfigError("config: checkpoint_dtype must be 'binary32' or 'binary64'");

    c.regions.clear();
    const json& regions = j.contains("regions") ? j.at("regions") : json::array();
    if (!regions.is_array()) throw ConfigError("config: 'regions' must be an array");
    for (const auto& r : regions) {
        RegionSpec spec;
        spec.seed_vertex = require<std::size_t>(r, "seed_vertex");
        spec.target_count = require<std::size_t>(r, "target_count");
        c.regions.push_back(spec);
    }
    if (c.regions.empty())
        throw ConfigError("config: missing required field 'regions'");

    c.validate();
    return c;
}

std::string SimConfig::to_json() const {
    json j;
    j["subdivision_level"] = subdivision_level;
    j["crop"] = crop == forward::Crop::hemisphere ? "hemisphere" : "none";
    j["source_radius"] = source_radius;
    j["sensor_count"] = sensor_count;
    j["shell_radius"] = shell_radius;
    j["cap_half_angle_deg"] = cap_half_angle_deg;
    j["sample_rate"] = sample_rate;
    j["n_steps"] = n_steps;
    j["carrier_hz"] = carrier_hz;
    j["envelope_hz"] = envelope_hz;
    j["snr_grid"] = snr_grid;
    j["lambda_grid"] = lambda_grid;
    j["n_seeds"] = n_seeds;
    j["noise_mode"] = noise_mode == NoiseMode::sensor ? "sensor" : "source";
    j["rng_seed"] = rng_seed;
    j["obs_shrinkage"] = obs_shrinkage;
    j["state_noise_floor"] = state_noise_floor;
    j["state_noise_scale"] = state_noise_scale;
    j["empty_room_steps"] = empty_room_steps;
    j["transition"] =
        transition == statespace::TransitionKind::identity ? "identity" : "neighbor";
    j["coupling"] = coupling;
    j["transition_decay"] = transition_decay;
    j["checkpoint_dtype"] =
        checkpoint_dtype == matfile::Dtype::binary32 ? "binary32" : "binary64";
    json regs = json::array();
    for (const auto& r : regions)
        regs.push_back({{"seed_vertex", r.seed_vertex}, {"target_count", r.target_count}});
    j["regions"] = std::move(regs);
    return j.dump(1);
}

GroundTruth synthesize_sources(const SimConfig& config, const forward::SourceSpace& space) {
    const std::size_t P = space.size();
    GroundTruth gt;
    gt.active_mask.assign(P, false);
    gt.region_ids.assign(P, -1);

    for (std::size_t ri = 0; ri < config.regions.size(); ++ri) {
        const RegionSpec& spec = config.regions[ri];
        if (spec.seed_vertex >= P)
            throw ConfigError("synthesize_sources: region seed vertex " +
                              std::to_string(spec.seed_vertex) + " outside source space");
        if (spec.target_count > P)
            throw ConfigError("synthesize_sources: region target count exceeds vertex count");
        // Breadth-first growth, index-ascending within each ring.
        std::deque<std::size_t> frontier{spec.seed_vertex};
        std::set<std::size_t> visited{spec.seed_vertex};
        std::size_t taken = 0;
        while (!frontier.empty() && taken < spec.target_count) {
            const std::size_t v = frontier.front();
            frontier.pop_front();
            if (!gt.active_mask[v]) {
                gt.active_mask[v] = true;
                gt.region_ids[v] = static_cast<int>(ri);
                ++taken;
            }
            for (std::size_t nb : space.neighbors[v])
                if (visited.insert(nb).second) frontier.push_back(nb);
        }
        if (taken < spec.target_count)
            throw ConfigError("synthesize_sources: region " + std::to_string(ri) +
                              " exhausted the mesh before reaching its target count");
    }

    gt.j_true = matcore::DenseMatrix(P, config.n_steps);
    for (std::size_t k = 0; k < config.n_steps; ++k) {
        const double t = static_cast<double>(k) / config.sample_rate;
        double carrier = 0.0;
        for (double f : config.carrier_hz) carrier += std::sin(2.0 * M_PI * f * t);
        const double s = std::sin(2.0 * M_PI * config.envelope_hz * t) * carrier;
        for (std::size_t p = 0; p < P; ++p)
            if (gt.active_mask[p]) gt.j_true.at(p, k) = s;
    }
    return gt;
}

NoisyRecording inject_noise(const GroundTruth& truth, const matcore::DenseMatrix& H,
                            double snr, NoiseMode mode, std::uint64_t seed) {
    if (!(snr > 0.0)) throw ContractError("inject_noise: snr must be positive");
    const std::size_t S = H.rows();
    const std::size_t P = H.cols();
    const std::size_t N = truth.j_true.cols();
    if (truth.j_true.rows() != P) throw ContractError("inject_noise: dimension mismatch");

    matcore::DenseMatrix clean = matcore::gemm_blocked(H, truth.j_true);  // S x N
    const double signal_power = clean.frobenius_norm();
    if (!(signal_power > 0.0))
        throw ContractError("inject_noise: ground truth produces no sensor signal");
    const double sig2 = signal_power * signal_power;

    RandomStream rng(seed);
    NoisyRecording out;
    if (mode == NoiseMode::sensor) {
        // SNR = ||H J||_F^2 / (S N sigma^2)
        double sigma2 = sig2 / (static_cast<double>(S * N) * snr);
        if (snr >= 1e12) sigma2 = 0.0;
        const double sigma = std::sqrt(sigma2);
        out.sigma = sigma;
        out.recording.data = clean;
        if (sigma > 0.0)
            for (std::size_t s = 0; s < S; ++s)
                for (std::size_t k = 0; k < N; ++k)
                    out.recording.data.at(s, k) += sigma * rng.gaussian();
    } else {
        // SNR = ||H J||_F^2 / (trace(H H^T) N sigma_src^2)
        double tr = 0.0;
        for (std::size_t i = 0; i < H.size(); ++i) tr += H.data()[i] * H.data()[i];
        double sigma2 = sig2 / (tr * static_cast<double>(N) * snr);
        if (snr >= 1e12) sigma2 = 0.0;
        const double sigma = std::sqrt(sigma2);
        out.sigma = sigma;
        matcore::DenseMatrix noisy = truth.j_true;
        if (sigma > 0.0)
            for (std::size_t p = 0; p < P; ++p)
                for (std::size_t k = 0; k < N; ++k)
                    noisy.at(p, k) += sigma * rng.gaussian();
        out.recording.data = matcore::gemm_blocked(H, noisy);
    }
    return out;
}

}  // namespace dsrc::sim
