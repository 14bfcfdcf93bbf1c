#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "dsrc/forward.hpp"

using namespace dsrc;
using namespace dsrc::forward;

namespace {

// Rotation about z by angle a.
Vec3 rot_z(const Vec3& v, double a) {
    return {std::cos(a) * v[0] - std::sin(a) * v[1],
            std::sin(a) * v[0] + std::cos(a) * v[1], v[2]};
}

}  // namespace

TEST_CASE("level-0 source space is an icosahedron") {
    SourceSpace s = build_source_space(0, 0.08, Crop::none);
    CHECK(s.size() == 12);
    for (const auto& nb : s.neighbors) CHECK(nb.size() == 5);
}

TEST_CASE("subdivision counts follow 10*4^l + 2") {
    CHECK(build_source_space(1, 0.08, Crop::none).size() == 42);
    CHECK(build_source_space(2, 0.08, Crop::none).size() == 162);
    CHECK(build_source_space(3, 0.08, Crop::none).size() == 642);
}

TEST_CASE("normals are unit length and mesh-radial") {
    SourceSpace s = build_source_space(2, 0.08, Crop::none);
    for (std::size_t p = 0; p < s.size(); ++p) {
        CHECK(std::fabs(norm(s.normals[p]) - 1.0) <= 1e-12);
        Vec3 back = s.center + s.radius * s.normals[p];
        CHECK(norm(back - s.vertices[p]) <= 1e-12);
    }
}

TEST_CASE("adjacency is symmetric") {
    for (Crop crop : {Crop::none, Crop::hemisphere}) {
        SourceSpace s = build_source_space(3, 0.08, crop);
        for (std::size_t p = 0; p < s.size(); ++p)
            for (std::size_t q : s.neighbors[p]) {
                const auto& back = s.neighbors[q];
                CHECK(std::find(back.begin(), back.end(), p) != back.end());
            }
    }
}

TEST_CASE("hemisphere crop keeps the expected vertex share") {
    SourceSpace s = build_source_space(3, 0.08, Crop::hemisphere);
    CHECK(s.size() >= 322);
    CHECK(s.size() <= 342);
    for (const auto& n : s.normals) CHECK(n[2] >= -1e-9);
}

TEST_CASE("subdivision level is range checked") {
    CHECK_THROWS_AS(build_source_space(-1, 0.08, Crop::none), ConfigError);
    CHECK_THROWS_AS(build_source_space(7, 0.08, Crop::none), ConfigError);
}

TEST_CASE("single sensor sits at the cap apex") {
    SensorArray a = build_sensor_array(1, 0.10, 120.0, 0.08);
    CHECK(a.size() == 1);
    CHECK(norm(a.positions[0] - Vec3{0, 0, 0.10}) <= 1e-12);
    CHECK(norm(a.orientations[0] - Vec3{0, 0, 1.0}) <= 1e-12);
}

TEST_CASE("sensor spiral positions are distinct") {
    SensorArray a = build_sensor_array(64, 0.10, 120.0, 0.08);
    CHECK(a.size() == 64);
    double min_gap = 1e9;
    for (std::size_t i = 0; i < 64; ++i)
        for (std::size_t j = i + 1; j < 64; ++j)
            min_gap = std::min(min_gap, norm(a.positions[i] - a.positions[j]));
    CHECK(min_gap > 0.0);
    for (const auto& p : a.positions) CHECK(std::fabs(norm(p) - 0.10) <= 1e-12);
}

TEST_CASE("shell inside the source sphere is rejected") {
    CHECK_THROWS_AS(build_sensor_array(16, 0.05, 120.0, 0.08), ConfigError);
}

TEST_CASE("radial dipoles and central dipoles are silent") {
    // Dipole along its own conductor-frame radius.
    Vec3 rq = {0.03, 0.01, 0.05};
    Vec3 sensor = {0.02, -0.01, 0.09};
    Vec3 b = dipole_field(rq, normalized(rq), sensor);
    // Cancellation noise only: compare against a tangential dipole there.
    Vec3 tangential = normalized(cross(rq, Vec3{0, 0, 1}));
    const double ref = norm(dipole_field(rq, tangential, sensor));
    CHECK(norm(b) <= 1e-12 * ref);
    // Dipole at the conductor center.
    Vec3 b2 = dipole_field({0, 0, 0}, {1, 0, 0}, {0.0, 0.0, 0.1});
    CHECK(norm(b2) == 0.0);
}

TEST_CASE("field decays faster than inverse square") {
    Vec3 rq = {0.0, 0.0, 0.05};
    Vec3 q = {1.0, 0.0, 0.0};  // tangential
    Vec3 s1 = {0.0, 0.02, 0.10};
    Vec3 s2 = 2.0 * s1;
    const double b1 = norm(dipole_field(rq, q, s1));
    const double b2 = norm(dipole_field(rq, q, s2));
    CHECK(b1 / b2 > 4.0);
}

TEST_CASE("normal-mode lead field has a silent column at the aligned vertex") {
    SourceSpace s = build_source_space(2, 0.08, Crop::none);
    SensorArray a = build_sensor_array(32, 0.10, 120.0, 0.08);
    LeadField h = lead_field(s, a, Orientation::normal);
    REQUIRE(h.matrix.cols() == s.size());

    // The vertex whose mesh normal aligns with its conductor-frame radius
    // (the one nearest the +z pole for the offset mesh) is silent.
    double best_align = -1.0;
    std::size_t aligned = 0;
    double col_norm_sum = 0.0;
    for (std::size_t p = 0; p < s.size(); ++p) {
        const double align = dot(normalized(s.vertices[p]), s.normals[p]);
        if (align > best_align) {
            best_align = align;
            aligned = p;
        }
        double cn = 0.0;
        for (std::size_t r = 0; r < a.size(); ++r) cn += h.matrix.at(r, p) * h.matrix.at(r, p);
        col_norm_sum += std::sqrt(cn);
    }
    const double mean_col = col_norm_sum / static_cast<double>(s.size());
    double aligned_norm = 0.0;
    for (std::size_t r = 0; r < a.size(); ++r)
        aligned_norm += h.matrix.at(r, aligned) * h.matrix.at(r, aligned);
    aligned_norm = std::sqrt(aligned_norm);
    if (best_align > 1.0 - 1e-9) {
        CHECK(aligned_norm <= 1e-9 * mean_col);
    }

    // No all-zero sensor rows.
    for (std::size_t r = 0; r < a.size(); ++r) {
        double rn = 0.0;
        for (std::size_t p = 0; p < s.size(); ++p) rn += h.matrix.at(r, p) * h.matrix.at(r, p);
        CHECK(rn > 0.0);
    }
}

TEST_CASE("lead field is linear in the dipole moment") {
    Vec3 rq = {0.02, 0.03, 0.04};
    Vec3 q = {0.3, -0.2, 0.5};
    Vec3 s = {0.01, 0.05, 0.09};
    Vec3 b1 = dipole_field(rq, q, s);
    Vec3 b2 = dipole_field(rq, 2.5 * q, s);
    CHECK(norm(b2 - 2.5 * b1) <= 1e-12 * norm(b2));
}

TEST_CASE("free-orientation radial columns are silent") {
    SourceSpace s = build_source_space(1, 0.08, Crop::none);
    SensorArray a = build_sensor_array(16, 0.10, 120.0, 0.08);
    LeadField h = lead_field(s, a, Orientation::free_triad);
    REQUIRE(h.matrix.cols() == 3 * s.size());
    for (std::size_t p = 0; p < s.size(); ++p) {
        double radial = 0.0, tangential = 0.0;
        for (std::size_t r = 0; r < a.size(); ++r) {
            radial += h.matrix.at(r, 3 * p + 2) * h.matrix.at(r, 3 * p + 2);
            tangential += h.matrix.at(r, 3 * p) * h.matrix.at(r, 3 * p) +
                          h.matrix.at(r, 3 * p + 1) * h.matrix.at(r, 3 * p + 1);
        }
        CHECK(std::sqrt(radial) <= 1e-12 * std::sqrt(tangential / 2.0));
    }
}

TEST_CASE("rotating sources and sensors together leaves readings unchanged") {
    SourceSpace s = build_source_space(1, 0.08, Crop::none);
    SensorArray a = build_sensor_array(24, 0.10, 120.0, 0.08);
    LeadField h0 = lead_field(s, a, Orientation::normal);

    const double ang = 0.77;
    SourceSpace sr = s;
    for (auto& v : sr.vertices) v = rot_z(v, ang);
    for (auto& n : sr.normals) n = rot_z(n, ang);
    sr.center = rot_z(sr.center, ang);
    SensorArray ar = a;
    for (auto& p : ar.positions) p = rot_z(p, ang);
    for (auto& o : ar.orientations) o = rot_z(o, ang);
    LeadField h1 = lead_field(sr, ar, Orientation::normal);

    double max_entry = 0.0, max_diff = 0.0;
    for (std::size_t i = 0; i < h0.matrix.size(); ++i) {
        max_entry = std::max(max_entry, std::fabs(h0.matrix.data()[i]));
        max_diff = std::max(max_diff, std::fabs(h0.matrix.data()[i] - h1.matrix.data()[i]));
    }
    CHECK(max_diff <= 1e-10 * max_entry);
}

TEST_CASE("sensor coincident with a source vertex is a geometry error") {
    SourceSpace s = build_source_space(0, 0.08, Crop::none);
    SensorArray a;
    a.positions = {s.vertices[0]};
    a.orientations = {{0, 0, 1}};
    CHECK_THROWS_AS(lead_field(s, a, Orientation::normal), ContractError);
}
