#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>

#include "dsrc/sim.hpp"
#include "test_support.hpp"

using namespace dsrc;
using namespace dsrc::sim;
using matcore::DenseMatrix;
using test_support::TempDir;

namespace {

SimConfig small_config() {
    SimConfig c;
    c.subdivision_level = 2;
    c.regions = {{0, 5}, {40, 5}};
    return c;
}

void write_text(const std::filesystem::path& p, const std::string& text) {
    std::ofstream f(p);
    f << text;
}

}  // namespace

TEST_CASE("random stream gaussians have sane moments and are reproducible") {
    RandomStream a(12345), b(12345);
    double sum = 0.0, sumsq = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const double x = a.gaussian();
        CHECK(b.gaussian() == x);
        sum += x;
        sumsq += x * x;
    }
    const double mean = sum / n;
    const double var = sumsq / n - mean * mean;
    CHECK(std::fabs(mean) < 0.03);
    CHECK(std::fabs(var - 1.0) < 0.05);
}

TEST_CASE("derived seeds differ across purposes and cells") {
    const auto s1 = RandomStream::derive_seed(1, 0, 0, 0);
    const auto s2 = RandomStream::derive_seed(1, 0, 0, 1);
    const auto s3 = RandomStream::derive_seed(1, 0, 1, 0);
    const auto s4 = RandomStream::derive_seed(2, 0, 0, 0);
    CHECK(s1 != s2);
    CHECK(s1 != s3);
    CHECK(s1 != s4);
    CHECK(s2 != s3);
}

TEST_CASE("source signal starts at zero and spans 0.2 seconds") {
    SimConfig c = small_config();
    auto space = forward::build_source_space(c.subdivision_level, c.source_radius, c.crop);
    auto truth = synthesize_sources(c, space);
    REQUIRE(truth.j_true.rows() == space.size());
    REQUIRE(truth.j_true.cols() == 120);
    CHECK(c.n_steps / c.sample_rate == doctest::Approx(0.2));

    // t = 0 zeroes every vertex; the envelope-carrier product vanishes.
    for (std::size_t p = 0; p < space.size(); ++p) CHECK(truth.j_true.at(p, 0) == 0.0);

    // Active vertices carry the closed-form waveform.
    std::size_t n_active = 0;
    for (std::size_t p = 0; p < space.size(); ++p) {
        if (!truth.active_mask[p]) {
            for (std::size_t k = 0; k < c.n_steps; ++k) CHECK(truth.j_true.at(p, k) == 0.0);
            continue;
        }
        ++n_active;
        for (std::size_t k = 1; k < c.n_steps; ++k) {
            const double t = static_cast<double>(k) / c.sample_rate;
            const double expected = std::sin(2.0 * M_PI * 0.4 * t) *
                                    (std::sin(2.0 * M_PI * 10.0 * t) +
                                     std::sin(2.0 * M_PI * 20.0 * t));
            CHECK(truth.j_true.at(p, k) == doctest::Approx(expected).epsilon(1e-12));
        }
    }
    CHECK(n_active == 10);
}

TEST_CASE("regions grow breadth-first with deterministic membership") {
    SimConfig c = small_config();
    auto space = forward::build_source_space(c.subdivision_level, c.source_radius, c.crop);
    auto t1 = synthesize_sources(c, space);
    auto t2 = synthesize_sources(c, space);
    CHECK(t1.active_mask == t2.active_mask);
    CHECK(t1.region_ids == t2.region_ids);

    // Each region contains its seed and is connected through the mesh.
    CHECK(t1.region_ids[0] == 0);
    CHECK(t1.region_ids[40] == 1);
    for (int rid = 0; rid < 2; ++rid) {
        std::size_t count = 0;
        for (std::size_t p = 0; p < space.size(); ++p)
            if (t1.region_ids[p] == rid) ++count;
        CHECK(count == 5);
    }
}

TEST_CASE("effectively infinite snr injects no noise") {
    SimConfig c = small_config();
    auto space = forward::build_source_space(c.subdivision_level, c.source_radius, c.crop);
    auto truth = synthesize_sources(c, space);
    auto sensors = forward::build_sensor_array(c.sensor_count, c.shell_radius,
                                               c.cap_half_angle_deg, c.source_radius);
    auto lead = forward::lead_field(space, sensors, forward::Orientation::normal);

    auto clean = inject_noise(truth, lead.matrix, 1e12, NoiseMode::sensor, 7);
    CHECK(clean.sigma == 0.0);
    DenseMatrix hj = matcore::gemm_blocked(lead.matrix, truth.j_true);
    CHECK(test_support::bitwise_equal(clean.recording.data, hj));
}

TEST_CASE("doubling snr halves the noise power") {
    SimConfig c = small_config();
    auto space = forward::build_source_space(c.subdivision_level, c.source_radius, c.crop);
    auto truth = synthesize_sources(c, space);
    auto sensors = forward::build_sensor_array(c.sensor_count, c.shell_radius,
                                               c.cap_half_angle_deg, c.source_radius);
    auto lead = forward::lead_field(space, sensors, forward::Orientation::normal);

    auto a = inject_noise(truth, lead.matrix, 0.5, NoiseMode::sensor, 7);
    auto b = inject_noise(truth, lead.matrix, 1.0, NoiseMode::sensor, 7);
    CHECK(a.sigma * a.sigma == doctest::Approx(2.0 * b.sigma * b.sigma).epsilon(1e-12));
}

TEST_CASE("measured snr matches the requested level on average") {
    SimConfig c = small_config();
    auto space = forward::build_source_space(c.subdivision_level, c.source_radius, c.crop);
    auto truth = synthesize_sources(c, space);
    auto sensors = forward::build_sensor_array(c.sensor_count, c.shell_radius,
                                               c.cap_half_angle_deg, c.source_radius);
    auto lead = forward::lead_field(space, sensors, forward::Orientation::normal);

    DenseMatrix hj = matcore::gemm_blocked(lead.matrix, truth.j_true);
    const double signal_power = hj.frobenius_norm() * hj.frobenius_norm();

    const double snr = 1.0;
    double noise_power = 0.0;
    const int trials = 50;
    for (int trial = 0; trial < trials; ++trial) {
        auto noisy = inject_noise(truth, lead.matrix, snr, NoiseMode::sensor,
                                  1000 + static_cast<std::uint64_t>(trial));
        DenseMatrix diff = matcore::subtract(noisy.recording.data, hj);
        noise_power += diff.frobenius_norm() * diff.frobenius_norm();
    }
    noise_power /= trials;
    const double measured = signal_power / noise_power;
    CHECK(measured > 0.9);
    CHECK(measured < 1.1);
}

TEST_CASE("noise injection leaves the truth untouched and is seed-stable") {
    SimConfig c = small_config();
    auto space = forward::build_source_space(c.subdivision_level, c.source_radius, c.crop);
    auto truth = synthesize_sources(c, space);
    auto sensors = forward::build_sensor_array(16, c.shell_radius, c.cap_half_angle_deg,
                                               c.source_radius);
    auto lead = forward::lead_field(space, sensors, forward::Orientation::normal);

    DenseMatrix snapshot = truth.j_true;
    auto n1 = inject_noise(truth, lead.matrix, 1.0, NoiseMode::sensor, 42);
    auto n2 = inject_noise(truth, lead.matrix, 1.0, NoiseMode::sensor, 42);
    auto n3 = inject_noise(truth, lead.matrix, 1.0, NoiseMode::sensor, 43);
    CHECK(test_support::bitwise_equal(truth.j_true, snapshot));
    CHECK(test_support::bitwise_equal(n1.recording.data, n2.recording.data));
    CHECK_FALSE(test_support::bitwise_equal(n1.recording.data, n3.recording.data));
}

TEST_CASE("source-space noise mode perturbs the sources before projection") {
    SimConfig c = small_config();
    auto space = forward::build_source_space(c.subdivision_level, c.source_radius, c.crop);
    auto truth = synthesize_sources(c, space);
    auto sensors = forward::build_sensor_array(16, c.shell_radius, c.cap_half_angle_deg,
                                               c.source_radius);
    auto lead = forward::lead_field(space, sensors, forward::Orientation::normal);

    auto noisy = inject_noise(truth, lead.matrix, 1.0, NoiseMode::source, 42);
    CHECK(noisy.sigma > 0.0);
    CHECK(noisy.recording.data.rows() == 16);
    CHECK(noisy.recording.data.cols() == c.n_steps);
}

TEST_CASE("config validation rejects bad values") {
    SimConfig c = small_config();
    SUBCASE("no regions") {
        c.regions.clear();
        CHECK_THROWS_AS(c.validate(), ConfigError);
    }
    SUBCASE("zero steps") {
        c.n_steps = 0;
        CHECK_THROWS_AS(c.validate(), ConfigError);
    }
    SUBCASE("nonpositive snr") {
        c.snr_grid = {0.0};
        CHECK_THROWS_AS(c.validate(), ConfigError);
    }
    SUBCASE("nonpositive lambda") {
        c.lambda_grid = {-1.0};
        CHECK_THROWS_AS(c.validate(), ConfigError);
    }
    SUBCASE("shell inside sources") {
        c.shell_radius = 0.05;
        CHECK_THROWS_AS(c.validate(), ConfigError);
    }
    SUBCASE("valid config passes") { CHECK_NOTHROW(c.validate()); }
}

TEST_CASE("json config round trip and error naming") {
    TempDir tmp("sim_json");
    SUBCASE("round trip preserves every field") {
        SimConfig c = small_config();
        c.snr_grid = {0.25, 2.0};
        c.lambda_grid = {0.5, 3.0};
        c.n_seeds = 3;
        c.rng_seed = 99;
        c.noise_mode = NoiseMode::source;
        c.transition = statespace::TransitionKind::neighbor;
        c.coupling = 0.1;
        c.checkpoint_dtype = matfile::Dtype::binary64;
        c.state_noise_scale = 0.125;
        write_text(tmp.path() / "c.json", c.to_json());
        SimConfig back = SimConfig::from_json_file(tmp.path() / "c.json");
        CHECK(back.subdivision_level == c.subdivision_level);
        CHECK(back.snr_grid == c.snr_grid);
        CHECK(back.lambda_grid == c.lambda_grid);
        CHECK(back.n_seeds == 3);
        CHECK(back.rng_seed == 99);
        CHECK(back.noise_mode == NoiseMode::source);
        CHECK(back.transition == statespace::TransitionKind::neighbor);
        CHECK(back.coupling == 0.1);
        CHECK(back.checkpoint_dtype == matfile::Dtype::binary64);
        CHECK(back.state_noise_scale == 0.125);
        CHECK(back.regions.size() == 2);
        CHECK(back.regions[1].seed_vertex == 40);
    }
    SUBCASE("missing required field is named in the error") {
        write_text(tmp.path() / "bad.json",
                   R"({"subdivision_level": 2, "sensor_count": 16, "n_steps": 120})");
        try {
            SimConfig::from_json_file(tmp.path() / "bad.json");
            FAIL("expected ConfigError");
        } catch (const ConfigError& e) {
            CHECK(std::string(e.what()).find("regions") != std::string::npos);
        }
    }
    SUBCASE("malformed json is a config error") {
        write_text(tmp.path() / "garbage.json", "{not json");
        CHECK_THROWS_AS(SimConfig::from_json_file(tmp.path() / "garbage.json"), ConfigError);
    }
    SUBCASE("missing file is a config error") {
        CHECK_THROWS_AS(SimConfig::from_json_file(tmp.path() / "nope.json"), ConfigError);
    }
}
