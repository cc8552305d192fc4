#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "pmlearn/common.hpp"
#include "pmlearn/geometry.hpp"
#include "pmlearn/imaging.hpp"
#include "pmlearn/io.hpp"
#include "pmlearn/mesh.hpp"
#include "pmlearn/noise.hpp"
#include "pmlearn/render.hpp"
#include "pmlearn/rng.hpp"

namespace pml {

struct ObjectSpec {
    MeshKind kind = MeshKind::sphere;
    double scale_m = 0.15;
    std::uint64_t color_seed = 0;
};

struct DatasetConfig {
    std::vector<ObjectSpec> objects;
    int coarse_level = 2;  // template sampling
    int fine_level = 3;    // training sampling
    bool in_plane = true;  // enumerate in-plane rotations for synthetic sets
    double in_plane_min_deg = -45;
    double in_plane_max_deg = 45;
    double in_plane_stride_deg = 15;
    double radius_m = 0.6;
    int image_size = 64;
    double focal_px = 96;
    int patch_size = 32;
    double cube_side_m = 0.4;
    Modality modality = Modality::rgbd;
    // pseudo-real generator (stand-in for sensor captures)
    int pseudo_real_per_object = 40;
    double pseudo_real_depth_sigma_m = 0.004;
    double pseudo_real_dropout = 0.08;
    std::string background_pool_dir;  // real-crop backgrounds when non-empty
    double real_fraction = 0.5;       // share of pseudo-real data in training
    NormalParams normal_params;
    std::uint64_t seed = 0;

    void validate() const {
        if (objects.empty()) throw config_error("dataset: no objects configured");
        if (fine_level <= coarse_level) {
            throw config_error("dataset: fine level must exceed coarse level");
        }
        if (coarse_level < 0 || fine_level > 6) {
            throw config_error("dataset: subdivision level out of range");
        }
        if (real_fraction < 0 || real_fraction > 1) {
            throw config_error("dataset: real fraction must be in [0, 1]");
        }
        if (in_plane_stride_deg <= 0 || in_plane_min_deg > in_plane_max_deg) {
            throw config_error("dataset: bad in-plane range");
        }
        if (pseudo_real_per_object < 0) {
            throw config_error("dataset: negative pseudo-real count");
        }
    }

    double eff_in_plane_min() const { return in_plane ? in_plane_min_deg : 0; }
    double eff_in_plane_max() const { return in_plane ? in_plane_max_deg : 0; }
};

enum class SetKind : std::uint8_t { train = 0, template_set = 1, test = 2 };

struct SampleSet {
    SetKind kind = SetKind::train;
    std::vector<Sample> samples;
    // Pose distance to the nearest same-class template; the coverage gap
    // that bounds attainable pose accuracy.
    std::vector<double> nearest_template_angle;

    void check_invariants() const {
        for (const auto& s : samples) {
            if (kind == SetKind::template_set && s.origin != Origin::synthetic) {
                throw invariant_error("template set must be fully synthetic");
            }
            if (kind == SetKind::test && s.origin != Origin::real) {
                throw invariant_error("test set must be fully real");
            }
            if (!s.pose.is_unit(1e-6)) {
                throw invariant_error("sample pose is not unit norm");
            }
        }
    }
};

namespace detail {

inline Sample render_sample(const TriMesh& mesh, int class_id,
                            const CameraPose& pose, const DatasetConfig& cfg,
                            bool with_normals) {
    auto view = render(mesh, pose, cfg.image_size, cfg.focal_px);
    Sample s;
    s.patch = extract_patch(view, cfg.radius_m, cfg.focal_px, cfg.cube_side_m,
                            cfg.patch_size);
    if (with_normals) add_normals(s.patch, cfg.normal_params);
    s.class_id = class_id;
    s.pose = pose.orientation;
    s.origin = Origin::synthetic;
    return s;
}

inline std::vector<TriMesh> build_meshes(const DatasetConfig& cfg) {
    std::vector<TriMesh> meshes;
    for (const auto& o : cfg.objects) {
        meshes.push_back(make_procedural_mesh(o.kind, o.scale_m, o.color_seed));
    }
    return meshes;
}

// The deterministic pseudo-real pool: random upper-hemisphere viewpoints
// with random in-plane roll, sensor-style perturbation, and (when a pool
// directory is configured) real-crop backgrounds, else fractal fill.
inline std::vector<Sample> build_real_pool(const DatasetConfig& cfg) {
    std::vector<TriMesh> meshes = build_meshes(cfg);
    BackgroundPool pool;
    if (!cfg.background_pool_dir.empty()) {
        pool = load_background_pool(cfg.background_pool_dir);
    }
    std::vector<Sample> out;
    for (std::size_t obj = 0; obj < meshes.size(); ++obj) {
        Rng rng(mix_seed(cfg.seed, 0x7265616c70ULL + obj));
        for (int i = 0; i < cfg.pseudo_real_per_object; ++i) {
            double z = rng.uniform();
            double az = rng.uniform(0, 2 * M_PI);
            double r = std::sqrt(std::max(0.0, 1.0 - z * z));
            Vec3 dir{r * std::cos(az), r * std::sin(az), z};
            double roll = rng.uniform(cfg.in_plane_min_deg, cfg.in_plane_max_deg);
            auto pose = make_camera_pose(dir * cfg.radius_m, roll);

            auto view = render(meshes[obj], pose, cfg.image_size, cfg.focal_px);
            std::uint64_t sample_seed = rng.next_u64();
            view = perturb_to_pseudo_real(view, sample_seed,
                                          cfg.pseudo_real_depth_sigma_m,
                                          cfg.pseudo_real_dropout);
            Sample s;
            s.patch = extract_patch(view, cfg.radius_m, cfg.focal_px,
                                    cfg.cube_side_m, cfg.patch_size);
            auto mask = foreground_mask(s.patch);
            NoiseSpec bg;
            bg.seed = sample_seed;
            if (!pool.empty()) {
                bg.kind = NoiseKind::real;
                bg.pool = &pool;
            } else {
                bg.kind = NoiseKind::fractal;
            }
            fill_background(s.patch, mask, bg, cfg.normal_params);
            add_normals(s.patch, cfg.normal_params);
            s.class_id = static_cast<int>(obj);
            s.pose = pose.orientation;
            s.origin = Origin::real;
            out.push_back(std::move(s));
        }
    }
    return out;
}

inline double nearest_template_angle(const Sample& s, const SampleSet& templates) {
    double best = M_PI;
    for (const auto& t : templates.samples) {
        if (t.class_id != s.class_id) continue;
        best = std::min(best, quat_angle(s.pose, t.pose));
    }
    return best;
}

// Indices of the pool samples closest in pose to the templates, per the
// real-to-train fraction. Stable and deterministic.
inline std::vector<int> select_real_for_training(
    const std::vector<Sample>& pool, const SampleSet& templates,
    double fraction) {
    std::vector<std::pair<double, int>> ranked(pool.size());
    for (std::size_t i = 0; i < pool.size(); ++i) {
        ranked[i] = {nearest_template_angle(pool[i], templates),
                     static_cast<int>(i)};
    }
    std::sort(ranked.begin(), ranked.end());
    std::size_t take = static_cast<std::size_t>(
        std::floor(fraction * static_cast<double>(pool.size()) + 1e-9));
    std::vector<int> selected;
    for (std::size_t i = 0; i < take && i < ranked.size(); ++i) {
        selected.push_back(ranked[i].second);
    }
    std::sort(selected.begin(), selected.end());
    return selected;
}

}  // namespace detail

// Coarse sampling over the upper hemisphere; backgrounds stay empty (black).
inline SampleSet build_template_set(const DatasetConfig& cfg) {
    cfg.validate();
    auto meshes = detail::build_meshes(cfg);
    auto sphere = subdivide_icosahedron(cfg.coarse_level, true);
    auto poses = enumerate_poses(sphere, cfg.eff_in_plane_min(),
                                 cfg.eff_in_plane_max(),
                                 cfg.in_plane_stride_deg, cfg.radius_m);
    SampleSet set;
    set.kind = SetKind::template_set;
    for (std::size_t obj = 0; obj < meshes.size(); ++obj) {
        for (const auto& pose : poses) {
            try {
                set.samples.push_back(detail::render_sample(
                    meshes[obj], static_cast<int>(obj), pose, cfg, true));
            } catch (const error& e) {
                throw error("template build failed for object " +
                            std::to_string(obj) + " (" +
                            to_string(cfg.objects[obj].kind) + "): " + e.what());
            }
        }
    }
    set.nearest_template_angle.assign(set.samples.size(), 0.0);
    set.check_invariants();
    return set;
}

// Fine synthetic sampling (backgrounds left empty, filled online during
// training) plus the real_fraction of pseudo-real samples nearest in pose
// to the templates.
inline SampleSet build_training_set(const DatasetConfig& cfg,
                                    const SampleSet& templates) {
    cfg.validate();
    auto meshes = detail::build_meshes(cfg);
    auto sphere = subdivide_icosahedron(cfg.fine_level, true);
    auto poses = enumerate_poses(sphere, cfg.eff_in_plane_min(),
                                 cfg.eff_in_plane_max(),
                                 cfg.in_plane_stride_deg, cfg.radius_m);
    SampleSet set;
    set.kind = SetKind::train;
    for (std::size_t obj = 0; obj < meshes.size(); ++obj) {
        for (const auto& pose : poses) {
            try {
                set.samples.push_back(detail::render_sample(
                    meshes[obj], static_cast<int>(obj), pose, cfg, false));
            } catch (const error& e) {
                throw error("training build failed for object " +
                            std::to_string(obj) + ": " + e.what());
            }
        }
    }
    auto pool = detail::build_real_pool(cfg);
    auto selected = detail::select_real_for_training(pool, templates,
                                                     cfg.real_fraction);
    for (int idx : selected) set.samples.push_back(pool[idx]);

    set.nearest_template_angle.resize(set.samples.size());
    for (std::size_t i = 0; i < set.samples.size(); ++i) {
        set.nearest_template_angle[i] =
            detail::nearest_template_angle(set.samples[i], templates);
    }
    set.check_invariants();
    return set;
}

// Exactly the pseudo-real samples not taken into training.
inline SampleSet build_test_set(const DatasetConfig& cfg,
                                const SampleSet& templates,
                                const SampleSet& train_set) {
    cfg.validate();
    auto pool = detail::build_real_pool(cfg);
    auto selected = detail::select_real_for_training(pool, templates,
                                                     cfg.real_fraction);
    // Verify the training set actually contains the selection.
    std::size_t train_real = 0;
    for (const auto& s : train_set.samples) {
        if (s.origin == Origin::real) ++train_real;
    }
    if (train_real != selected.size()) {
        throw invariant_error("test build: train set does not match the pool split");
    }

    SampleSet set;
    set.kind = SetKind::test;
    std::vector<bool> taken(pool.size(), false);
    for (int idx : selected) taken[idx] = true;
    for (std::size_t i = 0; i < pool.size(); ++i) {
        if (!taken[i]) set.samples.push_back(pool[i]);
    }
    set.nearest_template_angle.resize(set.samples.size());
    for (std::size_t i = 0; i < set.samples.size(); ++i) {
        set.nearest_template_angle[i] =
            detail::nearest_template_angle(set.samples[i], templates);
    }
    set.check_invariants();
    return set;
}

// ---- persistence: magic "PMDS1", manifest block, then patch records ----

inline void save_set(const SampleSet& set, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw format_error("cannot open for writing: " + path);
    bin::put_magic(os, "PMDS1");
    bin::put_u8(os, static_cast<std::uint8_t>(set.kind));
    bin::put_u64(os, set.samples.size());
    // Manifest: fixed-size rows so offsets are computable up front.
    // Row: class u32, origin u8, quat 4xf64, coverage f64, offset u64.
    std::size_t header = 5 + 1 + 8;
    std::size_t row = 4 + 1 + 32 + 8 + 8;
    std::size_t offset = header + row * set.samples.size();
    std::vector<std::uint64_t> offsets;
    for (const auto& s : set.samples) {
        offsets.push_back(offset);
        offset += 5 + 4 + 4 + 4 + 1 + 32 +
                  s.patch.data.size() * 4;  // record layout, see imaging.hpp
    }
    for (std::size_t i = 0; i < set.samples.size(); ++i) {
        const auto& s = set.samples[i];
        bin::put_u32(os, static_cast<std::uint32_t>(s.class_id));
        bin::put_u8(os, static_cast<std::uint8_t>(s.origin));
        bin::put_f64(os, s.pose.w);
        bin::put_f64(os, s.pose.x);
        bin::put_f64(os, s.pose.y);
        bin::put_f64(os, s.pose.z);
        bin::put_f64(os, i < set.nearest_template_angle.size()
                             ? set.nearest_template_angle[i]
                             : 0.0);
        bin::put_u64(os, offsets[i]);
    }
    for (const auto& s : set.samples) save_patch_record(os, s);
}

inline SampleSet load_set(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw format_error("cannot open: " + path);
    bin::expect_magic(is, "PMDS1");
    SampleSet set;
    set.kind = static_cast<SetKind>(bin::get_u8(is));
    std::uint64_t n = bin::get_u64(is);
    if (n > 100000000ULL) throw format_error("implausible sample count");
    struct Row {
        int class_id;
        Origin origin;
        Quaternion pose;
        double coverage;
        std::uint64_t offset;
    };
    std::vector<Row> manifest(n);
    for (auto& r : manifest) {
        r.class_id = static_cast<int>(bin::get_u32(is));
        r.origin = static_cast<Origin>(bin::get_u8(is));
        r.pose.w = bin::get_f64(is);
        r.pose.x = bin::get_f64(is);
        r.pose.y = bin::get_f64(is);
        r.pose.z = bin::get_f64(is);
        r.coverage = bin::get_f64(is);
        r.offset = bin::get_u64(is);
    }
    set.samples.reserve(n);
    for (const auto& r : manifest) {
        Sample s = load_patch_record(is);
        if (s.class_id != r.class_id || s.origin != r.origin) {
            throw format_error("manifest does not match payload");
        }
        set.samples.push_back(std::move(s));
        set.nearest_template_angle.push_back(r.coverage);
    }
    return set;
}

inline std::string manifest_text(const SampleSet& set) {
    std::ostringstream os;
    const char* kind = set.kind == SetKind::train
                           ? "train"
                           : (set.kind == SetKind::template_set ? "template"
                                                                : "test");
    os << "kind " << kind << "\n";
    os << "samples " << set.samples.size() << "\n";
    for (std::size_t i = 0; i < set.samples.size(); ++i) {
        const auto& s = set.samples[i];
        os << i << " class=" << s.class_id << " origin="
           << (s.origin == Origin::real ? "real" : "synthetic") << " q=("
           << s.pose.w << "," << s.pose.x << "," << s.pose.y << "," << s.pose.z
           << ") coverage_deg="
           << (i < set.nearest_template_angle.size()
                   ? set.nearest_template_angle[i] * 180.0 / M_PI
                   : 0.0)
           << "\n";
    }
    return os.str();
}

// Procedural stand-in for captured background imagery: desk-like scenes of
// tilted planar surfaces carrying periodic textures (gratings, checkers),
// lighting gradients, and sensor speckle, written as PPM/PGM pairs. The
// textures matter: they put the pool statistics far outside anything the
// online white/shapes/fractal generators produce, as with real captures.
inline void generate_background_pool(const std::string& dir, int count,
                                     int size, std::uint64_t seed) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    for (int i = 0; i < count; ++i) {
        std::uint64_t s = mix_seed(seed, 0x6267706f6f6cULL + static_cast<std::uint64_t>(i));
        Rng rng(mix_seed(s, 2));
        std::size_t plane = static_cast<std::size_t>(size) * size;
        std::vector<float> rgb(3 * plane);
        std::vector<float> depth(plane);
        // Backdrop: smooth low-frequency field with a lighting gradient,
        // far depth following the field.
        auto base = fractal_noise(size, 4, s, 3, 0.55, 3.0 / size);
        double gx = rng.uniform(-1.0, 1.0), gy = rng.uniform(-1.0, 1.0);
        double gamp = rng.uniform(0.15, 0.4);
        for (std::size_t p = 0; p < plane; ++p) {
            double u = static_cast<double>(p % size) / size - 0.5;
            double v = static_cast<double>(p / size) / size - 0.5;
            float grad = static_cast<float>(gamp * (gx * u + gy * v));
            for (int c = 0; c < 3; ++c) rgb[c * plane + p] = base[c][p] + grad;
            depth[p] = 1.5f + 1.5f * base[3][p];
        }
        // A few textured rectangles: gratings and checkerboards on tilted
        // planes at book/keyboard depths — structure no online generator
        // produces, so only training on the pool itself prepares for it.
        int rects = 2 + static_cast<int>(rng.index(2));
        for (int rct = 0; rct < rects; ++rct) {
            int w = size / 6 + static_cast<int>(rng.index(size / 4));
            int h = size / 6 + static_cast<int>(rng.index(size / 4));
            int x0 = static_cast<int>(rng.index(std::max(1, size - w)));
            int y0 = static_cast<int>(rng.index(std::max(1, size - h)));
            bool checker = rng.uniform() < 0.5;
            double freq = rng.uniform(4.0, 14.0) * 2.0 * M_PI / size;
            double th = rng.uniform(0, M_PI);
            double ca = std::cos(th), sa = std::sin(th);
            float col_a[3], col_b[3];
            for (int c = 0; c < 3; ++c) {
                col_a[c] = static_cast<float>(rng.uniform(0.05, 0.95));
                col_b[c] = static_cast<float>(rng.uniform(0.05, 0.95));
            }
            double z0 = rng.uniform(0.9, 1.8);
            double tx = rng.uniform(-0.3, 0.3), ty = rng.uniform(-0.3, 0.3);
            for (int y = y0; y < y0 + h; ++y) {
                for (int x = x0; x < x0 + w; ++x) {
                    std::size_t p = static_cast<std::size_t>(y) * size + x;
                    double a = ca * x + sa * y, b = -sa * x + ca * y;
                    double t;
                    if (checker) {
                        int cell = (static_cast<int>(std::floor(a * freq / M_PI)) +
                                    static_cast<int>(std::floor(b * freq / M_PI)));
                        t = (cell & 1) ? 1.0 : 0.0;
                    } else {
                        t = 0.5 + 0.5 * std::sin(a * freq);
                    }
                    for (int c = 0; c < 3; ++c) {
                        rgb[c * plane + p] = static_cast<float>(
                            col_a[c] + t * (col_b[c] - col_a[c]));
                    }
                    depth[p] = static_cast<float>(
                        z0 + tx * (x - x0) / size + ty * (y - y0) / size);
                }
            }
        }
        // Sensor speckle on every pixel.
        for (std::size_t p = 0; p < plane; ++p) {
            for (int c = 0; c < 3; ++c) {
                rgb[c * plane + p] = std::clamp(
                    rgb[c * plane + p] +
                        static_cast<float>(rng.uniform(-0.08, 0.08)),
                    0.f, 1.f);
            }
            depth[p] += static_cast<float>(rng.uniform(-0.02, 0.02));
        }
        std::ostringstream name;
        name << "bg_" << i;
        write_ppm((fs::path(dir) / (name.str() + ".ppm")).string(), size, size, rgb);
        write_pgm16((fs::path(dir) / (name.str() + ".pgm")).string(), size, size,
                    depth);
    }
}

}  // namespace pml
