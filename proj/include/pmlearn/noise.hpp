#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "pmlearn/common.hpp"
#include "pmlearn/imaging.hpp"
#include "pmlearn/io.hpp"
#include "pmlearn/rng.hpp"

namespace pml {

enum class NoiseKind { white, shapes, fractal, real };

inline const char* to_string(NoiseKind k) {
    switch (k) {
        case NoiseKind::white: return "white";
        case NoiseKind::shapes: return "shapes";
        case NoiseKind::fractal: return "fractal";
        case NoiseKind::real: return "real";
    }
    return "?";
}

inline NoiseKind noise_kind_from_string(const std::string& s) {
    for (NoiseKind k : {NoiseKind::white, NoiseKind::shapes, NoiseKind::fractal,
                        NoiseKind::real}) {
        if (s == to_string(k)) return k;
    }
    throw config_error("unknown noise kind: " + s);
}

// Paired RGB + depth backgrounds loaded from PPM/PGM files; read-only
// after load. Values are kept in [0,1] (depth rescaled by its max).
struct BackgroundPool {
    struct Image {
        int width = 0, height = 0;
        std::vector<float> rgb;    // 3 planes
        std::vector<float> depth;  // 1 plane, [0,1]
    };
    std::vector<Image> images;

    bool empty() const { return images.empty(); }
};

// Pairs *.ppm with *.pgm by filename stem.
inline BackgroundPool load_background_pool(const std::string& dir) {
    namespace fs = std::filesystem;
    BackgroundPool pool;
    std::map<std::string, fs::path> ppms;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.path().extension() == ".ppm") ppms[e.path().stem().string()] = e.path();
    }
    for (const auto& [stem, ppm] : ppms) {
        fs::path pgm = ppm;
        pgm.replace_extension(".pgm");
        BackgroundPool::Image img;
        int w2 = 0, h2 = 0;
        read_ppm(ppm.string(), img.width, img.height, img.rgb);
        if (fs::exists(pgm)) {
            read_pgm16(pgm.string(), w2, h2, img.depth);
            if (w2 != img.width || h2 != img.height) {
                throw config_error("background pair size mismatch: " + stem);
            }
            float mx = 0;
            for (float d : img.depth) mx = std::max(mx, d);
            if (mx > 0) {
                for (float& d : img.depth) d /= mx;
            }
        } else {
            // Depth falls back to the green plane.
            img.depth.assign(img.rgb.begin() + img.width * img.height,
                             img.rgb.begin() + 2 * img.width * img.height);
        }
        pool.images.push_back(std::move(img));
    }
    return pool;
}

struct NoiseSpec {
    NoiseKind kind = NoiseKind::fractal;
    std::uint64_t seed = 0;
    // fractal
    int octaves = 4;
    double persistence = 0.5;
    double base_frequency = 0.0;  // 0 -> 4/size
    // shapes
    int shape_count_min = 4;
    int shape_count_max = 10;
    // real
    const BackgroundPool* pool = nullptr;

    void validate() const {
        if (octaves < 1 || octaves > 8) {
            throw config_error("fractal octaves must be in [1, 8]");
        }
        if (persistence <= 0 || persistence > 1) {
            throw config_error("fractal persistence must be in (0, 1]");
        }
        if (shape_count_min > shape_count_max) {
            throw config_error("empty shape count range");
        }
    }
};

// ---- simplex noise (2D gradient lattice on the simplex grid) ----

namespace simplex {

// value is 0 at every lattice corner by construction.
inline double noise2(double xin, double yin, std::uint64_t seed) {
    static const double F2 = 0.5 * (std::sqrt(3.0) - 1.0);
    static const double G2 = (3.0 - std::sqrt(3.0)) / 6.0;
    static const int grad[8][2] = {{1, 1},  {-1, 1}, {1, -1}, {-1, -1},
                                   {1, 0},  {-1, 0}, {0, 1},  {0, -1}};

    double s = (xin + yin) * F2;
    int i = static_cast<int>(std::floor(xin + s));
    int j = static_cast<int>(std::floor(yin + s));
    double t = (i + j) * G2;
    double x0 = xin - (i - t);
    double y0 = yin - (j - t);

    int i1 = x0 > y0 ? 1 : 0;
    int j1 = 1 - i1;

    double x1 = x0 - i1 + G2, y1 = y0 - j1 + G2;
    double x2 = x0 - 1.0 + 2.0 * G2, y2 = y0 - 1.0 + 2.0 * G2;

    auto hash = [&](int ci, int cj) {
        std::uint64_t h = mix_seed(seed, (static_cast<std::uint64_t>(
                                              static_cast<std::uint32_t>(ci))
                                          << 32) |
                                             static_cast<std::uint32_t>(cj));
        return grad[h & 7];
    };

    double total = 0;
    const int corners[3][2] = {{i, j}, {i + i1, j + j1}, {i + 1, j + 1}};
    const double xs[3] = {x0, x1, x2};
    const double ys[3] = {y0, y1, y2};
    for (int c = 0; c < 3; ++c) {
        double tc = 0.5 - xs[c] * xs[c] - ys[c] * ys[c];
        if (tc <= 0) continue;
        const int* g = hash(corners[c][0], corners[c][1]);
        tc *= tc;
        total += tc * tc * (g[0] * xs[c] + g[1] * ys[c]);
    }
    return 70.0 * total;  // roughly [-1, 1]
}

}  // namespace simplex

// ---- generators; each returns `channels` planes of size*size floats ----

// i.i.d. uniform [0,1) per pixel per channel.
inline std::vector<std::vector<float>> white_noise(int size, int channels,
                                                   std::uint64_t seed) {
    if (size < 1) throw bounds_error("white_noise: size must be >= 1");
    Rng rng(mix_seed(seed, 0x7768697465ULL));
    std::vector<std::vector<float>> planes(channels);
    for (auto& p : planes) {
        p.resize(static_cast<std::size_t>(size) * size);
        for (auto& v : p) v = static_cast<float>(rng.uniform());
    }
    return planes;
}

// Octaves of simplex noise with frequency doubling and amplitude decay,
// rescaled to [0,1] by the per-plane min/max.
inline std::vector<std::vector<float>> fractal_noise(int size, int channels,
                                                     std::uint64_t seed,
                                                     int octaves,
                                                     double persistence,
                                                     double base_frequency = 0) {
    if (octaves < 1) throw bounds_error("fractal_noise: octaves must be >= 1");
    if (base_frequency <= 0) base_frequency = 4.0 / size;
    std::vector<std::vector<float>> planes(channels);
    for (int c = 0; c < channels; ++c) {
        std::uint64_t ch_seed = mix_seed(seed, 0x6672616374ULL + c);
        auto& p = planes[c];
        p.resize(static_cast<std::size_t>(size) * size);
        double lo = 1e30, hi = -1e30;
        for (int y = 0; y < size; ++y) {
            for (int x = 0; x < size; ++x) {
                double v = 0, amp = 1, freq = base_frequency;
                for (int o = 0; o < octaves; ++o) {
                    v += amp * simplex::noise2(x * freq, y * freq,
                                               mix_seed(ch_seed, o));
                    amp *= persistence;
                    freq *= 2;
                }
                p[static_cast<std::size_t>(y) * size + x] = static_cast<float>(v);
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
        }
        double span = hi - lo;
        if (span < 1e-12) span = 1;
        for (auto& v : p) v = static_cast<float>((v - lo) / span);
    }
    return planes;
}

// Filled rectangles, circles and triangles; each shape carries one sampled
// value shared by all channels, so depth and color stay consistent.
// with_foreground additionally returns an occluder mask of shapes meant to
// sit on top of the object.
inline std::vector<std::vector<float>> random_shapes(
    int size, int channels, std::uint64_t seed, int count_min, int count_max,
    bool with_foreground = false, std::vector<std::uint8_t>* occluder = nullptr) {
    if (count_min > count_max) throw bounds_error("random_shapes: empty count range");
    Rng rng(mix_seed(seed, 0x736861706573ULL));
    std::vector<std::vector<float>> planes(
        channels, std::vector<float>(static_cast<std::size_t>(size) * size, 0.f));
    if (occluder) occluder->assign(static_cast<std::size_t>(size) * size, 0);

    int count = count_min + static_cast<int>(rng.index(
                                static_cast<std::size_t>(count_max - count_min + 1)));
    for (int s = 0; s < count; ++s) {
        int type = static_cast<int>(rng.index(3));
        float value = static_cast<float>(rng.uniform());
        double cx = rng.uniform(0, size), cy = rng.uniform(0, size);
        double r = rng.uniform(size * 0.05, size * 0.3);
        bool fg = with_foreground && rng.uniform() < 0.25;
        double x2 = cx + rng.uniform(-2 * r, 2 * r);
        double y2 = cy + rng.uniform(-2 * r, 2 * r);
        double x3 = cx + rng.uniform(-2 * r, 2 * r);
        double y3 = cy + rng.uniform(-2 * r, 2 * r);
        for (int y = 0; y < size; ++y) {
            for (int x = 0; x < size; ++x) {
                bool inside = false;
                switch (type) {
                    case 0:  // rectangle
                        inside = std::abs(x - cx) <= r && std::abs(y - cy) <= r * 0.75;
                        break;
                    case 1:  // circle
                        inside = (x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r;
                        break;
                    default: {  // triangle
                        auto edge = [](double ax, double ay, double bx, double by,
                                       double px, double py) {
                            return (bx - ax) * (py - ay) - (by - ay) * (px - ax);
                        };
                        double e0 = edge(cx, cy, x2, y2, x, y);
                        double e1 = edge(x2, y2, x3, y3, x, y);
                        double e2 = edge(x3, y3, cx, cy, x, y);
                        inside = (e0 >= 0 && e1 >= 0 && e2 >= 0) ||
                                 (e0 <= 0 && e1 <= 0 && e2 <= 0);
                        break;
                    }
                }
                if (!inside) continue;
                std::size_t idx = static_cast<std::size_t>(y) * size + x;
                for (auto& p : planes) p[idx] = value;
                if (occluder && fg) (*occluder)[idx] = 1;
            }
        }
    }
    return planes;
}

// Uniform random image choice and top-left crop; RGB and depth planes come
// from the same location.
inline std::vector<std::vector<float>> real_background_crop(
    const BackgroundPool& pool, int size, std::uint64_t seed) {
    if (pool.empty()) throw config_error("real background pool is empty");
    Rng rng(mix_seed(seed, 0x7265616cULL));
    const auto& img = pool.images[rng.index(pool.images.size())];
    if (img.width < size || img.height < size) {
        throw config_error("background pool image smaller than requested crop");
    }
    int x0 = static_cast<int>(rng.index(img.width - size + 1));
    int y0 = static_cast<int>(rng.index(img.height - size + 1));
    std::vector<std::vector<float>> planes(
        4, std::vector<float>(static_cast<std::size_t>(size) * size));
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            std::size_t src = static_cast<std::size_t>(y0 + y) * img.width + x0 + x;
            std::size_t dst = static_cast<std::size_t>(y) * size + x;
            std::size_t plane = static_cast<std::size_t>(img.width) * img.height;
            for (int c = 0; c < 3; ++c) planes[c][dst] = img.rgb[c * plane + src];
            planes[3][dst] = img.depth[src];
        }
    }
    return planes;
}

// Fill background (mask == 0) pixels of every present plane; foreground
// pixels are preserved bit-exactly. Normal planes, if present, are
// recomputed from the filled depth afterwards.
inline void fill_background(PatchTensor& patch,
                            const std::vector<std::uint8_t>& mask,
                            const NoiseSpec& spec,
                            const NormalParams& normal_params = {}) {
    spec.validate();
    if (!patch.has(ch_d) && !patch.has(ch_r)) {
        throw config_error("fill_background: patch has neither RGB nor depth");
    }
    if (mask.size() != patch.plane_size()) {
        throw config_error("fill_background: mask size mismatch");
    }

    std::vector<Channel> fill_channels;
    for (Channel c : {ch_r, ch_g, ch_b, ch_d}) {
        if (patch.has(c)) fill_channels.push_back(c);
    }
    int nch = static_cast<int>(fill_channels.size());

    std::vector<std::vector<float>> planes;
    switch (spec.kind) {
        case NoiseKind::white:
            planes = white_noise(patch.size, nch, spec.seed);
            break;
        case NoiseKind::shapes:
            planes = random_shapes(patch.size, nch, spec.seed,
                                   spec.shape_count_min, spec.shape_count_max);
            break;
        case NoiseKind::fractal:
            planes = fractal_noise(patch.size, nch, spec.seed, spec.octaves,
                                   spec.persistence, spec.base_frequency);
            break;
        case NoiseKind::real: {
            if (spec.pool == nullptr || spec.pool->empty()) {
                throw config_error("fill_background: real noise needs a pool");
            }
            auto crop = real_background_crop(*spec.pool, patch.size, spec.seed);
            // crop order is R,G,B,D; map onto whichever planes exist.
            for (Channel c : fill_channels) {
                switch (c) {
                    case ch_r: planes.push_back(crop[0]); break;
                    case ch_g: planes.push_back(crop[1]); break;
                    case ch_b: planes.push_back(crop[2]); break;
                    default: planes.push_back(crop[3]); break;
                }
            }
            break;
        }
    }

    for (int c = 0; c < nch; ++c) {
        float* dst = patch.plane(fill_channels[c]);
        const auto& src = planes[c];
        for (std::size_t i = 0; i < mask.size(); ++i) {
            if (!mask[i]) dst[i] = src[i];
        }
    }
    if (patch.has(ch_nx) && patch.has(ch_d)) {
        // Recompute normals over the filled depth, keeping foreground planes
        // bit-exact.
        std::vector<float> keep_nx(patch.plane(ch_nx),
                                   patch.plane(ch_nx) + patch.plane_size());
        std::vector<float> keep_ny(patch.plane(ch_ny),
                                   patch.plane(ch_ny) + patch.plane_size());
        std::vector<float> keep_nz(patch.plane(ch_nz),
                                   patch.plane(ch_nz) + patch.plane_size());
        add_normals(patch, normal_params);
        float* nx = patch.plane(ch_nx);
        float* ny = patch.plane(ch_ny);
        float* nz = patch.plane(ch_nz);
        for (std::size_t i = 0; i < mask.size(); ++i) {
            if (mask[i]) {
                nx[i] = keep_nx[i];
                ny[i] = keep_ny[i];
                nz[i] = keep_nz[i];
            }
        }
    }
}

// Foreground mask from a depth plane: hit pixels are those clearly in
// front of the far plane.
inline std::vector<std::uint8_t> foreground_mask(const PatchTensor& patch,
                                                 double background_depth = 0.999) {
    const float* d = patch.plane(ch_d);
    std::vector<std::uint8_t> mask(patch.plane_size());
    for (std::size_t i = 0; i < mask.size(); ++i) {
        mask[i] = d[i] < background_depth ? 1 : 0;
    }
    return mask;
}

}  // namespace pml
