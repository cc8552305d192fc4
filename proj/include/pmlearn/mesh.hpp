#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "pmlearn/common.hpp"
#include "pmlearn/geometry.hpp"
#include "pmlearn/rng.hpp"

namespace pml {

struct Rgb {
    float r = 0, g = 0, b = 0;
};

// Triangle mesh in the object frame, colored per vertex.
// Must fit inside the 0.4 m patch cube centered at its centroid.
struct TriMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> triangles;
    std::vector<Rgb> colors;

    Vec3 centroid() const {
        Vec3 c;
        for (const auto& v : vertices) c = c + v;
        return c * (1.0 / static_cast<double>(vertices.size()));
    }

    void validate() const {
        if (vertices.empty() || triangles.empty()) {
            throw invariant_error("mesh is empty");
        }
        int n = static_cast<int>(vertices.size());
        for (const auto& t : triangles) {
            for (int i : t) {
                if (i < 0 || i >= n) throw invariant_error("triangle index out of range");
            }
            Vec3 a = vertices[t[1]] - vertices[t[0]];
            Vec3 b = vertices[t[2]] - vertices[t[0]];
            if (a.cross(b).norm() * 0.5 <= 1e-12) {
                throw invariant_error("degenerate triangle");
            }
        }
        Vec3 c = centroid();
        for (const auto& v : vertices) {
            Vec3 d = v - c;
            if (std::abs(d.x) > 0.2 || std::abs(d.y) > 0.2 || std::abs(d.z) > 0.2) {
                throw invariant_error("mesh exceeds the 0.4 m patch cube");
            }
        }
    }
};

enum class MeshKind { sphere, box, cylinder, cone, torus, star };

inline const char* to_string(MeshKind k) {
    switch (k) {
        case MeshKind::sphere: return "sphere";
        case MeshKind::box: return "box";
        case MeshKind::cylinder: return "cylinder";
        case MeshKind::cone: return "cone";
        case MeshKind::torus: return "torus";
        case MeshKind::star: return "star";
    }
    return "?";
}

inline MeshKind mesh_kind_from_string(const std::string& s) {
    for (MeshKind k : {MeshKind::sphere, MeshKind::box, MeshKind::cylinder,
                       MeshKind::cone, MeshKind::torus, MeshKind::star}) {
        if (s == to_string(k)) return k;
    }
    throw config_error("unknown mesh kind: " + s);
}

namespace detail {

inline void color_vertices(TriMesh& mesh, std::uint64_t color_seed) {
    Rng rng(mix_seed(color_seed, 0x636f6c6f72ULL));
    // One base hue per mesh with per-vertex variation, so views of the same
    // object look related but not flat.
    float base_r = static_cast<float>(0.2 + 0.8 * rng.uniform());
    float base_g = static_cast<float>(0.2 + 0.8 * rng.uniform());
    float base_b = static_cast<float>(0.2 + 0.8 * rng.uniform());
    mesh.colors.resize(mesh.vertices.size());
    for (auto& c : mesh.colors) {
        auto jitter = [&](float base) {
            double v = base * (0.7 + 0.6 * rng.uniform());
            return static_cast<float>(std::clamp(v, 0.0, 1.0));
        };
        c = {jitter(base_r), jitter(base_g), jitter(base_b)};
    }
}

inline TriMesh sphere_mesh(double radius) {
    std::vector<Vec3> verts = detail::icosahedron_vertices();
    auto faces = detail::icosahedron_faces();
    for (int l = 0; l < 3; ++l) {
        std::map<std::pair<int, int>, int> midpoint;
        auto mid = [&](int a, int b) {
            auto key = std::minmax(a, b);
            auto it = midpoint.find(key);
            if (it != midpoint.end()) return it->second;
            verts.push_back(((verts[a] + verts[b]) * 0.5).normalized());
            int idx = static_cast<int>(verts.size()) - 1;
            midpoint.emplace(key, idx);
            return idx;
        };
        std::vector<std::array<int, 3>> next;
        for (const auto& f : faces) {
            int ab = mid(f[0], f[1]), bc = mid(f[1], f[2]), ca = mid(f[2], f[0]);
            next.push_back({f[0], ab, ca});
            next.push_back({f[1], bc, ab});
            next.push_back({f[2], ca, bc});
            next.push_back({ab, bc, ca});
        }
        faces = std::move(next);
    }
    TriMesh mesh;
    for (const auto& v : verts) mesh.vertices.push_back(v * radius);
    mesh.triangles = std::move(faces);
    return mesh;
}

inline TriMesh box_mesh(double half) {
    TriMesh m;
    for (int i = 0; i < 8; ++i) {
        m.vertices.push_back({(i & 1) ? half : -half, (i & 2) ? half : -half,
                              (i & 4) ? half : -half});
    }
    m.triangles = {{0, 2, 1}, {1, 2, 3}, {4, 5, 6}, {5, 7, 6},
                   {0, 1, 4}, {1, 5, 4}, {2, 6, 3}, {3, 6, 7},
                   {0, 4, 2}, {2, 4, 6}, {1, 3, 5}, {3, 7, 5}};
    return m;
}

// Closed lateral surface + end caps around the z axis.
inline TriMesh lathe_mesh(const std::vector<std::pair<double, double>>& profile,
                          int segments, bool cap_bottom, bool cap_top) {
    TriMesh m;
    int rings = static_cast<int>(profile.size());
    for (int r = 0; r < rings; ++r) {
        for (int s = 0; s < segments; ++s) {
            double a = 2.0 * M_PI * s / segments;
            m.vertices.push_back({profile[r].first * std::cos(a),
                                  profile[r].first * std::sin(a),
                                  profile[r].second});
        }
    }
    auto idx = [&](int r, int s) { return r * segments + (s % segments); };
    for (int r = 0; r + 1 < rings; ++r) {
        for (int s = 0; s < segments; ++s) {
            int a = idx(r, s), b = idx(r, s + 1);
            int c = idx(r + 1, s), d = idx(r + 1, s + 1);
            if (profile[r].first > 1e-12) {
                m.triangles.push_back({a, b, c});
            }
            if (profile[r + 1].first > 1e-12) {
                m.triangles.push_back({b, d, c});
            }
        }
    }
    if (cap_bottom && profile.front().first > 1e-12) {
        int center = static_cast<int>(m.vertices.size());
        m.vertices.push_back({0, 0, profile.front().second});
        for (int s = 0; s < segments; ++s) {
            m.triangles.push_back({center, idx(0, s + 1), idx(0, s)});
        }
    }
    if (cap_top && profile.back().first > 1e-12) {
        int center = static_cast<int>(m.vertices.size());
        m.vertices.push_back({0, 0, profile.back().second});
        for (int s = 0; s < segments; ++s) {
            m.triangles.push_back({center, idx(rings - 1, s), idx(rings - 1, s + 1)});
        }
    }
    return m;
}

inline TriMesh torus_mesh(double major, double minor, int seg_u, int seg_v) {
    TriMesh m;
    for (int i = 0; i < seg_u; ++i) {
        double u = 2.0 * M_PI * i / seg_u;
        for (int j = 0; j < seg_v; ++j) {
            double v = 2.0 * M_PI * j / seg_v;
            double r = major + minor * std::cos(v);
            m.vertices.push_back(
                {r * std::cos(u), r * std::sin(u), minor * std::sin(v)});
        }
    }
    auto idx = [&](int i, int j) { return (i % seg_u) * seg_v + (j % seg_v); };
    for (int i = 0; i < seg_u; ++i) {
        for (int j = 0; j < seg_v; ++j) {
            m.triangles.push_back({idx(i, j), idx(i + 1, j), idx(i, j + 1)});
            m.triangles.push_back({idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)});
        }
    }
    return m;
}

// Star polyhedron: alternating outer/inner ring plus two poles.
inline TriMesh star_mesh(double outer, double inner, int points, double half_depth) {
    TriMesh m;
    int n = points * 2;
    for (int i = 0; i < n; ++i) {
        double a = M_PI * i / points;
        double r = (i % 2 == 0) ? outer : inner;
        m.vertices.push_back({r * std::cos(a), r * std::sin(a), 0.0});
    }
    int top = n, bottom = n + 1;
    m.vertices.push_back({0, 0, half_depth});
    m.vertices.push_back({0, 0, -half_depth});
    for (int i = 0; i < n; ++i) {
        int j = (i + 1) % n;
        m.triangles.push_back({i, j, top});
        m.triangles.push_back({j, i, bottom});
    }
    return m;
}

}  // namespace detail

// Watertight primitive with deterministic per-vertex coloring.
// scale_m is the dominant radius/half-extent of the primitive.
inline TriMesh make_procedural_mesh(MeshKind kind, double scale_m,
                                    std::uint64_t color_seed) {
    if (scale_m <= 0.05 || scale_m > 0.35) {
        throw bounds_error("make_procedural_mesh: scale must be in (0.05, 0.35]");
    }
    TriMesh mesh;
    switch (kind) {
        case MeshKind::sphere:
            mesh = detail::sphere_mesh(scale_m);
            break;
        case MeshKind::box:
            mesh = detail::box_mesh(scale_m * 0.5);
            break;
        case MeshKind::cylinder: {
            double r = scale_m * 0.45, h = scale_m * 0.5;
            mesh = detail::lathe_mesh({{r, -h}, {r, h}}, 24, true, true);
            break;
        }
        case MeshKind::cone: {
            // Truncated slightly at the apex to keep all triangles non-degenerate.
            double r = scale_m * 0.55, h = scale_m * 0.5;
            mesh = detail::lathe_mesh(
                {{r, -h}, {r * 0.5, 0.0}, {r * 0.02, h}}, 24, true, true);
            break;
        }
        case MeshKind::torus:
            mesh = detail::torus_mesh(scale_m * 0.65, scale_m * 0.3, 24, 12);
            break;
        case MeshKind::star:
            mesh = detail::star_mesh(scale_m, scale_m * 0.45, 5, scale_m * 0.35);
            break;
    }
    detail::color_vertices(mesh, color_seed);
    mesh.validate();
    return mesh;
}

}  // namespace pml
