#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <vector>

#include "pmlearn/common.hpp"

namespace pml {

struct Vec3 {
    double x = 0, y = 0, z = 0;

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    Vec3 cross(const Vec3& o) const {
        return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
    }
    double norm() const { return std::sqrt(dot(*this)); }
    Vec3 normalized() const {
        double n = norm();
        if (n < 1e-300) throw invariant_error("cannot normalize zero vector");
        return *this * (1.0 / n);
    }
};

// Unit quaternion representing a rotation. q and -q are the same rotation.
struct Quaternion {
    double w = 1, x = 0, y = 0, z = 0;

    double dot(const Quaternion& o) const {
        return w * o.w + x * o.x + y * o.y + z * o.z;
    }

    double norm() const { return std::sqrt(dot(*this)); }

    Quaternion normalized() const {
        double n = norm();
        if (n < 1e-300) throw invariant_error("cannot normalize zero quaternion");
        return {w / n, x / n, y / n, z / n};
    }

    bool is_unit(double tol = 1e-9) const {
        return std::abs(dot(*this) - 1.0) <= tol;
    }

    Quaternion conjugate() const { return {w, -x, -y, -z}; }

    Quaternion operator*(const Quaternion& o) const {
        return {w * o.w - x * o.x - y * o.y - z * o.z,
                w * o.x + x * o.w + y * o.z - z * o.y,
                w * o.y - x * o.z + y * o.w + z * o.x,
                w * o.z + x * o.y - y * o.x + z * o.w};
    }

    // Rotate a vector: v' = q v q*
    Vec3 rotate(const Vec3& v) const {
        Vec3 u{x, y, z};
        Vec3 t = u.cross(v) * 2.0;
        return v + t * w + u.cross(t);
    }

    // Row-major 3x3 rotation matrix.
    std::array<double, 9> to_matrix() const {
        return {1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
                2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
                2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)};
    }
};

inline Quaternion quat_from_axis_angle(const Vec3& axis, double angle) {
    double n = axis.norm();
    if (std::abs(n - 1.0) > 1e-9) {
        throw invariant_error("quat_from_axis_angle: axis must be unit length");
    }
    double h = 0.5 * angle;
    double s = std::sin(h);
    return Quaternion{std::cos(h), axis.x * s, axis.y * s, axis.z * s}.normalized();
}

// Angular distance between rotations: 2 arccos(|a . b|), in [0, pi].
inline double quat_angle(const Quaternion& a, const Quaternion& b) {
    if (!a.is_unit() || !b.is_unit()) {
        throw invariant_error("quat_angle: inputs must be unit quaternions");
    }
    double d = std::min(std::abs(a.dot(b)), 1.0);
    return 2.0 * std::acos(d);
}

// Orthonormal-basis to quaternion (columns are the rotated frame axes).
inline Quaternion quat_from_basis(const Vec3& cx, const Vec3& cy, const Vec3& cz) {
    // Shepperd's method over the row-major matrix with columns cx,cy,cz.
    double m00 = cx.x, m01 = cy.x, m02 = cz.x;
    double m10 = cx.y, m11 = cy.y, m12 = cz.y;
    double m20 = cx.z, m21 = cy.z, m22 = cz.z;
    double tr = m00 + m11 + m22;
    Quaternion q;
    if (tr > 0) {
        double s = std::sqrt(tr + 1.0) * 2;
        q = {0.25 * s, (m21 - m12) / s, (m02 - m20) / s, (m10 - m01) / s};
    } else if (m00 > m11 && m00 > m22) {
        double s = std::sqrt(1.0 + m00 - m11 - m22) * 2;
        q = {(m21 - m12) / s, 0.25 * s, (m01 + m10) / s, (m02 + m20) / s};
    } else if (m11 > m22) {
        double s = std::sqrt(1.0 + m11 - m00 - m22) * 2;
        q = {(m02 - m20) / s, (m01 + m10) / s, 0.25 * s, (m12 + m21) / s};
    } else {
        double s = std::sqrt(1.0 + m22 - m00 - m11) * 2;
        q = {(m10 - m01) / s, (m02 + m20) / s, (m12 + m21) / s, 0.25 * s};
    }
    return q.normalized();
}

struct ViewSphere {
    std::vector<Vec3> vertices;
    int level = 0;
    bool hemisphere_only = false;
};

namespace detail {

inline std::vector<Vec3> icosahedron_vertices() {
    const double p = (1.0 + std::sqrt(5.0)) / 2.0;
    std::vector<Vec3> v = {
        {-1, p, 0}, {1, p, 0}, {-1, -p, 0}, {1, -p, 0},
        {0, -1, p}, {0, 1, p}, {0, -1, -p}, {0, 1, -p},
        {p, 0, -1}, {p, 0, 1}, {-p, 0, -1}, {-p, 0, 1}};
    for (auto& u : v) u = u.normalized();
    return v;
}

inline std::vector<std::array<int, 3>> icosahedron_faces() {
    return {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
            {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
            {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
            {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
}

}  // namespace detail

// Recursive 4-way triangle subdivision of the icosahedron with shared edge
// midpoints deduplicated and re-projected onto the unit sphere.
// Vertex count before hemisphere filtering is 10*4^level + 2.
inline ViewSphere subdivide_icosahedron(int level, bool hemisphere_only = false) {
    if (level < 0 || level > 6) {
        throw bounds_error("subdivide_icosahedron: level must be in [0, 6]");
    }
    std::vector<Vec3> verts = detail::icosahedron_vertices();
    std::vector<std::array<int, 3>> faces = detail::icosahedron_faces();

    for (int l = 0; l < level; ++l) {
        std::map<std::pair<int, int>, int> midpoint;
        auto mid = [&](int a, int b) {
            auto key = std::minmax(a, b);
            auto it = midpoint.find(key);
            if (it != midpoint.end()) return it->second;
            Vec3 m = ((verts[a] + verts[b]) * 0.5).normalized();
            int idx = static_cast<int>(verts.size());
            verts.push_back(m);
            midpoint.emplace(key, idx);
            return idx;
        };
        std::vector<std::array<int, 3>> next;
        next.reserve(faces.size() * 4);
        for (const auto& f : faces) {
            int ab = mid(f[0], f[1]);
            int bc = mid(f[1], f[2]);
            int ca = mid(f[2], f[0]);
            next.push_back({f[0], ab, ca});
            next.push_back({f[1], bc, ab});
            next.push_back({f[2], ca, bc});
            next.push_back({ab, bc, ca});
        }
        faces = std::move(next);
    }

    ViewSphere sphere;
    sphere.level = level;
    sphere.hemisphere_only = hemisphere_only;
    if (hemisphere_only) {
        // Equator vertices are kept.
        for (const auto& v : verts) {
            if (v.z >= -1e-9) sphere.vertices.push_back(v);
        }
    } else {
        sphere.vertices = std::move(verts);
    }
    return sphere;
}

struct CameraPose {
    Quaternion orientation;   // camera-to-world rotation
    Vec3 position;            // meters
    double in_plane_deg = 0;  // roll about the optical axis

    // Camera-frame forward is (0,0,-1); it must point at the origin.
    Vec3 forward() const { return orientation.rotate({0, 0, -1}); }
};

// Look-at orientation for a camera at `position` facing the origin, then a
// roll of `in_plane_deg` about the optical axis.
inline CameraPose make_camera_pose(const Vec3& position, double in_plane_deg) {
    Vec3 fwd = (position * -1.0).normalized();
    Vec3 up_ref{0, 0, 1};
    if (std::abs(fwd.dot(up_ref)) > 0.999) up_ref = {0, 1, 0};
    Vec3 right = fwd.cross(up_ref).normalized();
    Vec3 up = right.cross(fwd);
    // camera axes in world: x=right, y=up, z=-forward
    Quaternion look = quat_from_basis(right, up, fwd * -1.0);
    Quaternion roll =
        quat_from_axis_angle({0, 0, -1}, in_plane_deg * M_PI / 180.0);
    CameraPose pose;
    pose.orientation = (look * roll).normalized();
    pose.position = position;
    pose.in_plane_deg = in_plane_deg;
    return pose;
}

// One pose per vertex per in-plane angle in {min, min+stride, ..., max}.
inline std::vector<CameraPose> enumerate_poses(const ViewSphere& sphere,
                                               double in_plane_min_deg,
                                               double in_plane_max_deg,
                                               double stride_deg,
                                               double radius_m) {
    if (stride_deg <= 0) throw bounds_error("enumerate_poses: stride must be > 0");
    if (in_plane_min_deg > in_plane_max_deg) {
        throw bounds_error("enumerate_poses: min > max");
    }
    std::vector<double> angles;
    for (double a = in_plane_min_deg; a <= in_plane_max_deg + 1e-9;
         a += stride_deg) {
        angles.push_back(a);
    }
    std::vector<CameraPose> poses;
    poses.reserve(sphere.vertices.size() * angles.size());
    for (const auto& v : sphere.vertices) {
        for (double a : angles) {
            poses.push_back(make_camera_pose(v * radius_m, a));
        }
    }
    return poses;
}

}  // namespace pml
