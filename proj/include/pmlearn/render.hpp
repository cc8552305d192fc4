#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "pmlearn/common.hpp"
#include "pmlearn/geometry.hpp"
#include "pmlearn/mesh.hpp"
#include "pmlearn/rng.hpp"

namespace pml {

// Z-buffered perspective render of one view. Background pixels carry
// depth == 0 and rgb == 0 exactly.
struct RenderedView {
    int size = 0;  // square image, size x size
    std::vector<float> rgb;    // 3 * size * size, plane-major R,G,B
    std::vector<float> depth;  // size * size, meters, 0 = no hit
    Quaternion pose;
    int class_id = -1;

    float& at(int plane, int y, int x) {
        return rgb[(static_cast<std::size_t>(plane) * size + y) * size + x];
    }
    float at(int plane, int y, int x) const {
        return rgb[(static_cast<std::size_t>(plane) * size + y) * size + x];
    }
    float& d(int y, int x) { return depth[static_cast<std::size_t>(y) * size + x]; }
    float d(int y, int x) const {
        return depth[static_cast<std::size_t>(y) * size + x];
    }
};

struct RenderIntrinsics {
    int image_size = 64;
    double focal_px = 64.0;
};

inline RenderedView render(const TriMesh& mesh, const CameraPose& pose,
                           int image_size, double focal_px) {
    if (image_size < 16) throw bounds_error("render: image_size must be >= 16");
    if (focal_px <= 0) throw bounds_error("render: focal length must be > 0");
    mesh.validate();

    RenderedView view;
    view.size = image_size;
    view.rgb.assign(static_cast<std::size_t>(3) * image_size * image_size, 0.f);
    view.depth.assign(static_cast<std::size_t>(image_size) * image_size, 0.f);
    view.pose = pose.orientation;

    // World -> camera: Xc = R^T (X - eye), camera looks along -z.
    Quaternion inv = pose.orientation.conjugate();
    const double cx = image_size / 2.0, cy = image_size / 2.0;
    const Vec3 light = Vec3{0.35, 0.45, 0.85}.normalized();
    const double ambient = 0.35;

    struct ScreenVert {
        double sx, sy, z;  // z = positive view depth
        Rgb color;
    };
    std::vector<ScreenVert> sv(mesh.vertices.size());
    std::vector<Vec3> cam(mesh.vertices.size());
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
        Vec3 c = inv.rotate(mesh.vertices[i] - pose.position);
        cam[i] = c;
        double z = -c.z;
        sv[i].z = z;
        if (z > 1e-6) {
            sv[i].sx = cx + focal_px * c.x / z;
            sv[i].sy = cy - focal_px * c.y / z;
        }
    }

    for (const auto& tri : mesh.triangles) {
        const ScreenVert& a = sv[tri[0]];
        const ScreenVert& b = sv[tri[1]];
        const ScreenVert& c = sv[tri[2]];
        if (a.z <= 1e-6 || b.z <= 1e-6 || c.z <= 1e-6) continue;

        // Face shading from the world-frame normal.
        Vec3 e1 = mesh.vertices[tri[1]] - mesh.vertices[tri[0]];
        Vec3 e2 = mesh.vertices[tri[2]] - mesh.vertices[tri[0]];
        Vec3 n = e1.cross(e2);
        double nn = n.norm();
        if (nn < 1e-15) continue;
        n = n * (1.0 / nn);
        // Orient toward the camera for shading.
        Vec3 view_dir = (pose.position - mesh.vertices[tri[0]]).normalized();
        if (n.dot(view_dir) < 0) n = n * -1.0;
        double intensity = ambient + (1.0 - ambient) * std::max(0.0, n.dot(light));

        double area = (b.sx - a.sx) * (c.sy - a.sy) - (b.sy - a.sy) * (c.sx - a.sx);
        if (std::abs(area) < 1e-12) continue;

        int x0 = std::max(0, static_cast<int>(std::floor(std::min({a.sx, b.sx, c.sx}))));
        int x1 = std::min(image_size - 1,
                          static_cast<int>(std::ceil(std::max({a.sx, b.sx, c.sx}))));
        int y0 = std::max(0, static_cast<int>(std::floor(std::min({a.sy, b.sy, c.sy}))));
        int y1 = std::min(image_size - 1,
                          static_cast<int>(std::ceil(std::max({a.sy, b.sy, c.sy}))));

        const Rgb& ca = mesh.colors[tri[0]];
        const Rgb& cb = mesh.colors[tri[1]];
        const Rgb& cc = mesh.colors[tri[2]];

        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                double px = x + 0.5, py = y + 0.5;
                double w0 = ((b.sx - px) * (c.sy - py) - (b.sy - py) * (c.sx - px)) / area;
                double w1 = ((c.sx - px) * (a.sy - py) - (c.sy - py) * (a.sx - px)) / area;
                double w2 = 1.0 - w0 - w1;
                if (w0 < 0 || w1 < 0 || w2 < 0) continue;
                // Perspective-correct interpolation via 1/z weights.
                double iz = w0 / a.z + w1 / b.z + w2 / c.z;
                double z = 1.0 / iz;
                float& zbuf = view.d(y, x);
                if (zbuf != 0.f && zbuf <= static_cast<float>(z)) continue;
                zbuf = static_cast<float>(z);
                double u0 = (w0 / a.z) * z, u1 = (w1 / b.z) * z, u2 = (w2 / c.z) * z;
                auto shade = [&](float va, float vb, float vc) {
                    double v = (u0 * va + u1 * vb + u2 * vc) * intensity;
                    return static_cast<float>(std::clamp(v, 0.0, 1.0));
                };
                view.at(0, y, x) = shade(ca.r, cb.r, cc.r);
                view.at(1, y, x) = shade(ca.g, cb.g, cc.g);
                view.at(2, y, x) = shade(ca.b, cb.b, cc.b);
            }
        }
    }
    return view;
}

// Sensor-style degradation standing in for commodity RGB-D captures:
// Gaussian depth noise and dropout on foreground pixels, mild global RGB
// gain/offset jitter. Deterministic per seed.
inline RenderedView perturb_to_pseudo_real(const RenderedView& view,
                                           std::uint64_t noise_seed,
                                           double depth_sigma_m,
                                           double dropout_rate) {
    if (dropout_rate < 0 || dropout_rate >= 0.5) {
        throw bounds_error("perturb_to_pseudo_real: dropout_rate must be in [0, 0.5)");
    }
    RenderedView out = view;
    if (depth_sigma_m == 0 && dropout_rate == 0) return out;
    Rng rng(mix_seed(noise_seed, 0x7073657564ULL));
    double gain = 1.0 + 0.2 * (rng.uniform() - 0.5);
    double offset = 0.1 * (rng.uniform() - 0.5);
    for (std::size_t i = 0; i < out.depth.size(); ++i) {
        if (out.depth[i] == 0.f) continue;
        if (depth_sigma_m > 0) {
            out.depth[i] += static_cast<float>(depth_sigma_m * rng.gaussian());
        }
        if (dropout_rate > 0 && rng.uniform() < dropout_rate) {
            out.depth[i] = 0.f;
        }
        for (int p = 0; p < 3; ++p) {
            std::size_t j = static_cast<std::size_t>(p) * out.depth.size() + i;
            if (gain != 1.0 || offset != 0.0) {
                out.rgb[j] = static_cast<float>(
                    std::clamp(out.rgb[j] * gain + offset, 0.0, 1.0));
            }
        }
    }
    return out;
}

}  // namespace pml
