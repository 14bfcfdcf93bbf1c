#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "dsrc/matcore.hpp"

namespace dsrc::forward {

using Vec3 = std::array<double, 3>;

Vec3 operator+(const Vec3& a, const Vec3& b);
Vec3 operator-(const Vec3& a, const Vec3& b);
Vec3 operator*(double s, const Vec3& a);
double dot(const Vec3& a, const Vec3& b);
Vec3 cross(const Vec3& a, const Vec3& b);
double norm(const Vec3& a);
Vec3 normalized(const Vec3& a);

enum class Crop { none, hemisphere };
enum class Orientation { normal, free_triad };

// Source mesh: icosphere vertices scaled to `radius` about `center`, with
// outward (mesh-frame) radial unit normals and edge adjacency.
//
// The mesh center is deliberately offset from the conductor origin
// (default 2 cm below it). With concentric spheres every mesh normal would
// be conductor-radial and hence magnetically silent, making the
// normal-orientation lead field identically zero.
struct SourceSpace {
    std::vector<Vec3> vertices;                     // conductor-frame positions (m)
    std::vector<Vec3> normals;                      // unit mesh-frame radial
    std::vector<std::vector<std::size_t>> neighbors;
    std::vector<int> region_labels;                 // -1 = unlabeled
    double radius = 0.0;
    Vec3 center = {0.0, 0.0, 0.0};

    std::size_t size() const { return vertices.size(); }
};

struct SensorArray {
    std::vector<Vec3> positions;     // on the outer shell (m)
    std::vector<Vec3> orientations;  // unit radial magnetometer axes

    std::size_t size() const { return positions.size(); }
};

struct LeadField {
    matcore::DenseMatrix matrix;  // S x P (normal) or S x 3P (free)
    Orientation mode = Orientation::normal;
};

inline constexpr Vec3 kDefaultSourceCenter = {0.0, 0.0, -0.02};

// Icosahedron subdivided `level` times (P_full = 10*4^level + 2), projected
// to the sphere. Hemisphere crop keeps mesh-frame z >= 0 and prunes
// adjacency. level must lie in [0, 6].
SourceSpace build_source_space(int level, double radius, Crop crop,
                               const Vec3& center = kDefaultSourceCenter);

// Golden-angle spiral of `count` radial magnetometers on the spherical cap
// of half-angle `cap_half_angle_deg` about +z, at `shell_radius` from the
// conductor origin.
SensorArray build_sensor_array(std::size_t count, double shell_radius,
                               double cap_half_angle_deg, double source_radius);

// Magnetic field of a current dipole (moment q at position r_q) inside a
// spherically symmetric conductor centered at the origin, evaluated at
// sensor position r (Sarvas closed form).
Vec3 dipole_field(const Vec3& r_q, const Vec3& q, const Vec3& r);

// Lead field: column p (or columns 3p..3p+2 in free mode) holds the sensor
// readings for a unit dipole at vertex p. Normal mode uses the mesh normal
// as the moment; free mode uses the tangent-tangent-radial triad at the
// vertex, radial taken from the conductor origin.
LeadField lead_field(const SourceSpace& space, const SensorArray& sensors, Orientation mode);

}  // namespace dsrc::forward
