#include "dsrc/forward.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <map>
#include <set>
#include <string>

namespace dsrc::forward {

Vec3 operator+(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
Vec3 operator-(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
Vec3 operator*(double s, const Vec3& a) { return {s * a[0], s * a[1], s * a[2]}; }
double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}
double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
Vec3 normalized(const Vec3& a) {
    double n = norm(a);
    return {a[0] / n, a[1] / n, a[2] / n};
}

namespace {

struct Mesh {
    std::vector<Vec3> verts;                        // unit sphere
    std::vector<std::array<std::size_t, 3>> tris;
};

Mesh icosahedron() {
    const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
    Mesh m;
    const double v[12][3] = {
        {-1, phi, 0}, {1, phi, 0}, {-1, -phi, 0}, {1, -phi, 0},
        {0, -1, phi}, {0, 1, phi}, {0, -1, -phi}, {0, 1, -phi},
        {phi, 0, -1}, {phi, 0, 1}, {-phi, 0, -1}, {-phi, 0, 1}};
    for (auto& p : v) m.verts.push_back(normalized({p[0], p[1], p[2]}));
    const std::size_t f[20][3] = {
        {0, 11, 5}, {0, 5, 1}, {0, 1, 7}, {0, 7, 10}, {0, 10, 11},
        {1, 5, 9}, {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
        {3, 9, 4}, {3, 4, 2}, {3, 2, 6}, {3, 6, 8}, {3, 8, 9},
        {4, 9, 5}, {2, 4, 11}, {6, 2, 10}, {8, 6, 7}, {9, 8, 1}};
    for (auto& t : f) m.tris.push_back({t[0], t[1], t[2]});
    return m;
}

Mesh subdivide_once(const Mesh& in) {
    Mesh out;
    out.verts = in.verts;
    std::map<std::pair<std::size_t, std::size_t>, std::size_t> midpoint;
    auto mid = [&](std::size_t a, std::size_t b) {
        auto key = std::minmax(a, b);
        auto it = midpoint.find(key);
        if (it != midpoint.end()) return it->second;
        Vec3 m = normalized(out.verts[a] + out.verts[b]);
        out.verts.push_back(m);
        std::size_t idx = out.verts.size() - 1;
        midpoint.emplace(key, idx);
        return idx;
    };
    for (auto& t : in.tris) {
        std::size_t a = mid(t[0], t[1]), b = mid(t[1], t[2]), c = mid(t[2], t[0]);
        out.tris.push_back({t[0], a, c});
        out.tris.push_back({t[1], b, a});
        out.tris.push_back({t[2], c, b});
        out.tris.push_back({a, b, c});
    }
    return out;
}

}  // namespace

SourceSpace build_source_space(int level, double radius, Crop crop, const Vec3& center) {
    if (level < 0 || level > 6)
        throw ConfigError("build_source_space: subdivision level " + std::to_string(level) +
                          " outside [0, 6]");
    if (!(radius > 0.0))
        throw ConfigError("build_source_space: radius must be positive");

    Mesh m = icosahedron();
    for (int i = 0; i < level; ++i) m = subdivide_once(m);

    std::vector<std::size_t> keep_index(m.verts.size(), SIZE_MAX);
    std::vector<std::size_t> kept;
    for (std::size_t i = 0; i < m.verts.size(); ++i) {
        if (crop == Crop::hemisphere && m.verts[i][2] < -1e-12) continue;
        keep_index[i] = kept.size();
        kept.push_back(i);
    }

    SourceSpace s;
    s.radius = radius;
    s.center = center;
    s.vertices.reserve(kept.size());
    s.normals.reserve(kept.size());
    for (std::size_t i : kept) {
        s.normals.push_back(m.verts[i]);
        s.vertices.push_back(center + radius * m.verts[i]);
    }
    s.region_labels.assign(kept.size(), -1);

    std::vector<std::set<std::size_t>> adj(kept.size());
    auto link = [&](std::size_t a, std::size_t b) {
        std::size_t ka = keep_index[a], kb = keep_index[b];
        if (ka == SIZE_MAX || kb == SIZE_MAX) return;
        adj[ka].insert(kb);
        adj[kb].insert(ka);
    };
    for (auto& t : m.tris) {
        link(t[0], t[1]);
        link(t[1], t[2]);
        link(t[2], t[0]);
    }
    s.neighbors.reserve(adj.size());
    for (auto& a : adj) s.neighbors.emplace_back(a.begin(), a.end());
    return s;
}

SensorArray build_sensor_array(std::size_t count, double shell_radius,
                               double cap_half_angle_deg, double source_radius) {
    if (count < 1) throw ConfigError("build_sensor_array: count must be >= 1");
    if (!(shell_radius > source_radius))
        throw ConfigError("build_sensor_array: shell radius " + std::to_string(shell_radius) +
                          " must exceed source radius " + std::to_string(source_radius));
    const double cap = cap_half_angle_deg * M_PI / 180.0;
    const double golden = M_PI * (3.0 - std::sqrt(5.0));
    SensorArray arr;
    arr.positions.reserve(count);
    arr.orientations.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const double frac = count == 1 ? 0.0 : static_cast<double>(i) / (count - 1);
        const double cos_t = 1.0 - frac * (1.0 - std::cos(cap));
        const double sin_t = std::sqrt(std::max(0.0, 1.0 - cos_t * cos_t));
        const double phi = golden * static_cast<double>(i);
        Vec3 u = {sin_t * std::cos(phi), sin_t * std::sin(phi), cos_t};
        arr.positions.push_back(shell_radius * u);
        arr.orientations.push_back(u);
    }
    return arr;
}

Vec3 dipole_field(const Vec3& r_q, const Vec3& q, const Vec3& r) {
    constexpr double mu0_4pi = 1e-7;
    const Vec3 a_vec = r - r_q;
    const double a = norm(a_vec);
    const double rn = norm(r);
    if (a < 1e-12)
        throw ContractError("dipole_field: sensor coincides with source");
    const double F = a * (rn * a + rn * rn - dot(r_q, r));
    if (std::fabs(F) < 1e-300)
        throw ContractError("dipole_field: degenerate geometry (F = 0)");
    const double adr = dot(a_vec, r);
    const Vec3 gradF = (a * a / rn + adr / a + 2.0 * a + 2.0 * rn) * r -
                       (a + 2.0 * rn + adr / a) * r_q;
    const Vec3 qxrq = cross(q, r_q);
    const Vec3 b = (1.0 / (F * F)) * (F * qxrq - dot(qxrq, r) * gradF);
    return mu0_4pi * b;
}

namespace {

// Tangent-tangent-radial triad at a conductor-frame position.
std::array<Vec3, 3> local_triad(const Vec3& v) {
    Vec3 er = norm(v) > 1e-12 ? normalized(v) : Vec3{0.0, 0.0, 1.0};
    Vec3 t1 = cross(er, Vec3{0.0, 0.0, 1.0});
    if (norm(t1) < 1e-8) t1 = cross(er, Vec3{1.0, 0.0, 0.0});
    t1 = normalized(t1);
    Vec3 t2 = cross(er, t1);
    return {t1, t2, er};
}

}  // namespace

LeadField lead_field(const SourceSpace& space, const SensorArray& sensors, Orientation mode) {
    if (space.size() == 0 || sensors.size() == 0)
        throw ContractError("lead_field: empty source space or sensor array");
    const std::size_t P = space.size();
    const std::size_t S = sensors.size();
    const std::size_t cols_per_vertex = mode == Orientation::normal ? 1 : 3;
    matcore::DenseMatrix h(S, P * cols_per_vertex);
    std::exception_ptr err;

#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t pi = 0; pi < static_cast<std::ptrdiff_t>(P); ++pi) {
        try {
        const std::size_t p = static_cast<std::size_t>(pi);
        const Vec3& rq = space.vertices[p];
        std::array<Vec3, 3> moments;
        if (mode == Orientation::normal) {
            moments[0] = space.normals[p];
        } else {
            moments = local_triad(rq);
        }
        for (std::size_t c = 0; c < cols_per_vertex; ++c) {
            for (std::size_t s = 0; s < S; ++s) {
                const Vec3 b = dipole_field(rq, moments[c], sensors.positions[s]);
                h.at(s, p * cols_per_vertex + c) = dot(b, sensors.orientations[s]);
            }
        }
        } catch (...) {
#pragma omp critical
            if (!err) err = std::current_exception();
        }
    }
    if (err) std::rethrow_exception(err);
    h.check_finite("lead_field");
    return LeadField{std::move(h), mode};
}

}  // namespace dsrc::forward
