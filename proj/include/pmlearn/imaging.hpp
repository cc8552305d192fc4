#pragma once

#include <cmath>
#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include "pmlearn/common.hpp"
#include "pmlearn/geometry.hpp"
#include "pmlearn/io.hpp"
#include "pmlearn/render.hpp"

namespace pml {

// Canonical plane order. Channel masks are bitwise ORs of these.
enum Channel : std::uint32_t {
    ch_r = 1 << 0,
    ch_g = 1 << 1,
    ch_b = 1 << 2,
    ch_d = 1 << 3,
    ch_nx = 1 << 4,
    ch_ny = 1 << 5,
    ch_nz = 1 << 6,
};

constexpr std::uint32_t mask_rgb = ch_r | ch_g | ch_b;
constexpr std::uint32_t mask_d = ch_d;
constexpr std::uint32_t mask_n = ch_nx | ch_ny | ch_nz;

enum class Modality { rgb, d, n, rgbd, nd, rgbn, rgbdn };

inline std::uint32_t modality_mask(Modality m) {
    switch (m) {
        case Modality::rgb: return mask_rgb;
        case Modality::d: return mask_d;
        case Modality::n: return mask_n;
        case Modality::rgbd: return mask_rgb | mask_d;
        case Modality::nd: return mask_n | mask_d;
        case Modality::rgbn: return mask_rgb | mask_n;
        case Modality::rgbdn: return mask_rgb | mask_d | mask_n;
    }
    return 0;
}

inline const char* to_string(Modality m) {
    switch (m) {
        case Modality::rgb: return "rgb";
        case Modality::d: return "d";
        case Modality::n: return "n";
        case Modality::rgbd: return "rgb-d";
        case Modality::nd: return "n-d";
        case Modality::rgbn: return "rgb-n";
        case Modality::rgbdn: return "rgb-d-n";
    }
    return "?";
}

inline Modality modality_from_string(const std::string& s) {
    for (Modality m : {Modality::rgb, Modality::d, Modality::n, Modality::rgbd,
                       Modality::nd, Modality::rgbn, Modality::rgbdn}) {
        if (s == to_string(m)) return m;
    }
    throw config_error("unknown modality: " + s);
}

inline int channel_count(std::uint32_t mask) {
    int n = 0;
    for (std::uint32_t b = 1; b <= ch_nz; b <<= 1) {
        if (mask & b) ++n;
    }
    return n;
}

// Multi-channel square float image holding some subset of R,G,B,D,Nx,Ny,Nz
// in canonical order.
struct PatchTensor {
    int size = 0;
    std::uint32_t mask = 0;
    std::vector<float> data;  // plane-major, canonical channel order

    int channels() const { return channel_count(mask); }

    bool has(Channel c) const { return (mask & c) != 0; }

    // Plane index of a channel within `data`, or -1 if absent.
    int plane_index(Channel c) const {
        if (!has(c)) return -1;
        int idx = 0;
        for (std::uint32_t b = 1; b < static_cast<std::uint32_t>(c); b <<= 1) {
            if (mask & b) ++idx;
        }
        return idx;
    }

    float* plane(Channel c) {
        int idx = plane_index(c);
        if (idx < 0) throw config_error("missing channel plane");
        return data.data() + static_cast<std::size_t>(idx) * size * size;
    }
    const float* plane(Channel c) const {
        return const_cast<PatchTensor*>(this)->plane(c);
    }

    std::size_t plane_size() const {
        return static_cast<std::size_t>(size) * size;
    }
};

enum class Origin : std::uint8_t { synthetic = 0, real = 1 };

// s = (x, c, q): one patch with its identity and pose.
struct Sample {
    PatchTensor patch;
    int class_id = -1;
    Quaternion pose;
    Origin origin = Origin::synthetic;
};

namespace detail {

inline float bilinear(const float* plane, int size, double x, double y) {
    x = std::clamp(x, 0.0, size - 1.0);
    y = std::clamp(y, 0.0, size - 1.0);
    int x0 = static_cast<int>(x), y0 = static_cast<int>(y);
    int x1 = std::min(x0 + 1, size - 1), y1 = std::min(y0 + 1, size - 1);
    double fx = x - x0, fy = y - y0;
    double v0 = plane[y0 * size + x0] * (1 - fx) + plane[y0 * size + x1] * fx;
    double v1 = plane[y1 * size + x0] * (1 - fx) + plane[y1 * size + x1] * fx;
    return static_cast<float>(v0 * (1 - fy) + v1 * fy);
}

}  // namespace detail

// Normalize RGB planes to zero mean and unit variance per channel.
// Zero-variance planes are set to all zeros.
inline void normalize_rgb(PatchTensor& patch) {
    for (Channel c : {ch_r, ch_g, ch_b}) {
        if (!patch.has(c)) continue;
        float* p = patch.plane(c);
        std::size_t n = patch.plane_size();
        double mean = 0;
        for (std::size_t i = 0; i < n; ++i) mean += p[i];
        mean /= static_cast<double>(n);
        double var = 0;
        for (std::size_t i = 0; i < n; ++i) {
            var += (p[i] - mean) * (p[i] - mean);
        }
        var /= static_cast<double>(n);
        if (var < 1e-12) {
            for (std::size_t i = 0; i < n; ++i) p[i] = 0.f;
        } else {
            double inv = 1.0 / std::sqrt(var);
            for (std::size_t i = 0; i < n; ++i) {
                p[i] = static_cast<float>((p[i] - mean) * inv);
            }
        }
    }
}

// Crop the projection of the patch cube (side cube_side_m, centered at the
// object origin) and resample to out_size. Depth is mapped affinely so the
// cube near face is 0 and the far face is 1; background maps to 1.
// The focal length and camera radius must match the render call.
inline PatchTensor extract_patch(const RenderedView& view, double radius_m,
                                 double focal_px, double cube_side_m,
                                 int out_size) {
    double half = cube_side_m / 2.0;
    double half_px = focal_px * half / radius_m;
    double cx = view.size / 2.0, cy = view.size / 2.0;
    if (cx - half_px < -0.5 || cx + half_px > view.size + 0.5) {
        throw extraction_error("patch cube projects outside the frame");
    }

    double near = radius_m - half, far = radius_m + half;
    std::vector<float> dnorm(view.depth.size());
    for (std::size_t i = 0; i < view.depth.size(); ++i) {
        float d = view.depth[i];
        if (d == 0.f) {
            dnorm[i] = 1.f;  // background is "far"
        } else {
            dnorm[i] = static_cast<float>(
                std::clamp((d - near) / (far - near), 0.0, 1.0));
        }
    }

    PatchTensor patch;
    patch.size = out_size;
    patch.mask = mask_rgb | mask_d;
    patch.data.assign(static_cast<std::size_t>(4) * out_size * out_size, 0.f);

    for (int y = 0; y < out_size; ++y) {
        for (int x = 0; x < out_size; ++x) {
            double sx = cx - half_px + (x + 0.5) / out_size * (2 * half_px) - 0.5;
            double sy = cy - half_px + (y + 0.5) / out_size * (2 * half_px) - 0.5;
            for (int p = 0; p < 3; ++p) {
                patch.data[static_cast<std::size_t>(p) * out_size * out_size +
                           static_cast<std::size_t>(y) * out_size + x] =
                    detail::bilinear(
                        view.rgb.data() + static_cast<std::size_t>(p) * view.depth.size(),
                        view.size, sx, sy);
            }
            patch.data[static_cast<std::size_t>(3) * out_size * out_size +
                       static_cast<std::size_t>(y) * out_size + x] =
                detail::bilinear(dnorm.data(), view.size, sx, sy);
        }
    }
    normalize_rgb(patch);
    return patch;
}

struct NormalParams {
    double cube_side_m = 0.4;
    int window = 5;               // odd
    double discontinuity = 0.05;  // normalized depth units
    double background_depth = 0.999;
};

// Least-squares depth gradient over a window, then the normal is the
// normalized cross product of the two tangent vectors it defines. Neighbors
// across a depth discontinuity are excluded; background pixels get (0,0,0).
inline void estimate_normals(const float* depth, int size,
                             const NormalParams& params, float* nx, float* ny,
                             float* nz) {
    if (params.window < 3 || params.window % 2 == 0) {
        throw bounds_error("estimate_normals: window must be odd and >= 3");
    }
    int half = params.window / 2;
    double pitch = params.cube_side_m / size;  // meters per pixel in the patch

    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            std::size_t idx = static_cast<std::size_t>(y) * size + x;
            double d0 = depth[idx];
            if (d0 >= params.background_depth) {
                nx[idx] = ny[idx] = nz[idx] = 0.f;
                continue;
            }
            // Normal equations for  sum (dx.g - dd)^2  over valid neighbors.
            double sxx = 0, sxy = 0, syy = 0, bx = 0, by = 0;
            int used = 0;
            for (int dy = -half; dy <= half; ++dy) {
                int yy = y + dy;
                if (yy < 0 || yy >= size) continue;
                for (int dx = -half; dx <= half; ++dx) {
                    int xx = x + dx;
                    if (xx < 0 || xx >= size) continue;
                    if (dx == 0 && dy == 0) continue;
                    double dd = depth[static_cast<std::size_t>(yy) * size + xx] - d0;
                    if (std::abs(dd) > params.discontinuity) continue;
                    sxx += dx * dx;
                    sxy += dx * dy;
                    syy += dy * dy;
                    bx += dx * dd;
                    by += dy * dd;
                    ++used;
                }
            }
            double det = sxx * syy - sxy * sxy;
            if (used < 2 || std::abs(det) < 1e-12) {
                nx[idx] = ny[idx] = 0.f;
                nz[idx] = 1.f;
                continue;
            }
            double gx = (syy * bx - sxy * by) / det;  // dD per pixel
            double gy = (sxx * by - sxy * bx) / det;
            // Camera frame: x right, y up, z toward the camera. Image rows
            // grow downward, hence the sign flip on gy.
            double mx = gx * params.cube_side_m * pitch;
            double my = -gy * params.cube_side_m * pitch;
            double mz = pitch * pitch;
            double n = std::sqrt(mx * mx + my * my + mz * mz);
            nx[idx] = static_cast<float>(mx / n);
            ny[idx] = static_cast<float>(my / n);
            nz[idx] = static_cast<float>(mz / n);
        }
    }
}

// Add Nx,Ny,Nz planes computed from the D plane (replacing any present).
inline void add_normals(PatchTensor& patch, const NormalParams& params) {
    if (!patch.has(ch_d)) throw config_error("add_normals: no depth plane");
    std::size_t n = patch.plane_size();
    std::vector<float> nx(n), ny(n), nz(n);
    estimate_normals(patch.plane(ch_d), patch.size, params, nx.data(), ny.data(),
                     nz.data());
    if (!patch.has(ch_nx)) {
        patch.mask |= mask_n;
        patch.data.resize(static_cast<std::size_t>(patch.channels()) * n, 0.f);
    }
    std::copy(nx.begin(), nx.end(), patch.plane(ch_nx));
    std::copy(ny.begin(), ny.end(), patch.plane(ch_ny));
    std::copy(nz.begin(), nz.end(), patch.plane(ch_nz));
}

// Select the planes a modality preset needs, in canonical order.
inline PatchTensor assemble_modality(const PatchTensor& full, Modality preset) {
    std::uint32_t want = modality_mask(preset);
    if ((full.mask & want) != want) {
        throw config_error(std::string("modality ") + to_string(preset) +
                           " needs planes missing from the patch");
    }
    PatchTensor out;
    out.size = full.size;
    out.mask = want;
    out.data.reserve(static_cast<std::size_t>(channel_count(want)) *
                     full.plane_size());
    for (Channel c : {ch_r, ch_g, ch_b, ch_d, ch_nx, ch_ny, ch_nz}) {
        if (!(want & c)) continue;
        const float* p = full.plane(c);
        out.data.insert(out.data.end(), p, p + full.plane_size());
    }
    return out;
}

// Binary patch record: magic, size, channel mask, class id, quaternion as
// 4 float64, then planes row-major float32 little-endian.
inline void save_patch_record(std::ostream& os, const Sample& s) {
    bin::put_magic(os, "PMPT1");
    bin::put_u32(os, static_cast<std::uint32_t>(s.patch.size));
    bin::put_u32(os, s.patch.mask);
    bin::put_u32(os, static_cast<std::uint32_t>(s.class_id));
    bin::put_u8(os, static_cast<std::uint8_t>(s.origin));
    bin::put_f64(os, s.pose.w);
    bin::put_f64(os, s.pose.x);
    bin::put_f64(os, s.pose.y);
    bin::put_f64(os, s.pose.z);
    bin::put_f32_block(os, s.patch.data);
}

inline Sample load_patch_record(std::istream& is) {
    bin::expect_magic(is, "PMPT1");
    Sample s;
    s.patch.size = static_cast<int>(bin::get_u32(is));
    s.patch.mask = bin::get_u32(is);
    s.class_id = static_cast<int>(bin::get_u32(is));
    s.origin = static_cast<Origin>(bin::get_u8(is));
    s.pose.w = bin::get_f64(is);
    s.pose.x = bin::get_f64(is);
    s.pose.y = bin::get_f64(is);
    s.pose.z = bin::get_f64(is);
    if (s.patch.size <= 0 || s.patch.size > 4096) {
        throw format_error("patch record: implausible size");
    }
    s.patch.data.resize(static_cast<std::size_t>(s.patch.channels()) *
                        s.patch.plane_size());
    bin::get_f32_block(is, s.patch.data);
    if (!is) throw format_error("patch record: truncated planes");
    return s;
}

}  // namespace pml
