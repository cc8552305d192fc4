// Acceptance suite: one TEST_CASE per criterion, each printing a single
// "criterion N: PASS/FAIL" line with its headline numbers. Run a single
// criterion with --test-case="*criterion N:*".
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "pmlearn/config.hpp"
#include "pmlearn/dataset.hpp"
#include "pmlearn/embed.hpp"
#include "pmlearn/eval.hpp"
#include "pmlearn/geometry.hpp"
#include "pmlearn/imaging.hpp"
#include "pmlearn/io.hpp"
#include "pmlearn/knn.hpp"
#include "pmlearn/loss.hpp"
#include "pmlearn/mesh.hpp"
#include "pmlearn/noise.hpp"
#include "pmlearn/render.hpp"
#include "pmlearn/rng.hpp"
#include "pmlearn/train.hpp"

using namespace pml;
namespace fs = std::filesystem;

namespace {

void verdict(int n, bool ok, const std::string& detail) {
    std::printf("criterion %d: %s (%s)\n", n, ok ? "PASS" : "FAIL",
                detail.c_str());
    std::fflush(stdout);
}

fs::path scratch_dir(const std::string& leaf) {
    fs::path dir = fs::temp_directory_path() / "pml_acceptance" / leaf;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

double median3(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[1];
}

Quaternion random_unit_quat(Rng& rng) {
    Quaternion q{rng.gaussian(), rng.gaussian(), rng.gaussian(),
                 rng.gaussian()};
    return q.normalized();
}

// Independent oracle: rotation angle via the relative rotation matrix trace.
double matrix_angle(const Quaternion& a, const Quaternion& b) {
    auto ra = a.to_matrix();
    auto rb = b.to_matrix();
    double tr = 0;
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) tr += ra[j * 3 + i] * rb[j * 3 + i];
    }
    return std::acos(std::clamp((tr - 1.0) / 2.0, -1.0, 1.0));
}

// One end-to-end run at a preset config: generate the three sets, train,
// and keep everything needed for evaluation.
struct Run {
    EmbeddingNet net;
    SampleSet templates;
    SampleSet test;
    TrainConfig train_cfg;

    double rate_on(const SampleSet& test_set) const {
        auto db = build_db(
            net, assemble_set(templates, train_cfg.modality,
                              train_cfg.normal_params));
        auto inputs = assemble_set(test_set, train_cfg.modality,
                                   train_cfg.normal_params);
        auto r = evaluate(net, db, inputs);
        r.validate();
        return 100.0 * r.classification_rate;
    }
    double rate() const { return rate_on(test); }
};

Run train_run(Config cfg, std::uint64_t seed) {
    cfg.dataset.seed = seed;
    cfg.train.seed = seed;
    if (!cfg.dataset.background_pool_dir.empty() &&
        !fs::exists(cfg.dataset.background_pool_dir)) {
        generate_background_pool(cfg.dataset.background_pool_dir, 256, 128, 99);
    }
    Run run{EmbeddingNet(cfg.dataset.patch_size,
                         channel_count(modality_mask(cfg.train.modality)),
                         cfg.descriptor_dim),
            {}, {}, cfg.train};
    run.templates = build_template_set(cfg.dataset);
    SampleSet training = build_training_set(cfg.dataset, run.templates);
    run.test = build_test_set(cfg.dataset, run.templates, training);
    BackgroundPool pool;
    if (cfg.train.background.kind == NoiseKind::real) {
        pool = load_background_pool(cfg.dataset.background_pool_dir);
        run.train_cfg.background.pool = &pool;
    }
    run.net.init_params(cfg.train.seed);
    train(run.net, training, run.templates, run.test, run.train_cfg);
    run.train_cfg.background.pool = nullptr;
    return run;
}

Config preset_variant(const std::string& preset, const std::string& variant) {
    for (auto& [name, cfg] : preset_configs(preset)) {
        if (name == variant) return cfg;
    }
    throw config_error("no variant " + variant + " in " + preset);
}

std::string read_bytes(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    REQUIRE(f.good());
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

const std::array<std::uint64_t, 3> kSeeds = {7, 8, 9};

}  // namespace

TEST_CASE("criterion 1: geometry oracles") {
    auto t0 = std::chrono::steady_clock::now();
    std::vector<std::size_t> expected = {12, 42, 162, 642};
    bool counts_ok = true;
    for (int level = 0; level <= 3; ++level) {
        counts_ok &=
            subdivide_icosahedron(level, false).vertices.size() ==
            expected[static_cast<std::size_t>(level)];
    }
    CHECK(counts_ok);

    Rng rng(42);
    double worst = 0;
    for (int i = 0; i < 1000; ++i) {
        Quaternion a = random_unit_quat(rng);
        Quaternion b = random_unit_quat(rng);
        worst = std::max(worst,
                         std::abs(quat_angle(a, b) - matrix_angle(a, b)));
    }
    CHECK(worst < 1e-6);
    double secs = std::chrono::duration<double>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
    CHECK(secs < 1.0);
    char buf[128];
    std::snprintf(buf, sizeof buf,
                  "counts 12/42/162/642, max angle dev %.2e, %.2fs", worst,
                  secs);
    verdict(1, counts_ok && worst < 1e-6 && secs < 1.0, buf);
}

TEST_CASE("criterion 2: full-pipeline gradient correctness") {
    // patch -> EmbeddingNet -> total_loss, finite differences on randomly
    // chosen parameters. ReLU/pool kinks make single components unreliable:
    // step-size-dependent estimates are skipped and one straggler per
    // instance is trimmed before the vector-norm relative error.
    auto t0 = std::chrono::steady_clock::now();
    Rng rng(41);
    int bad = 0, instances = 0;
    double worst_rel = 0;
    for (int trial = 0; trial < 25; ++trial) {
        EmbeddingNet net(16, 2, 3);
        net.init_params(100 + trial);
        std::vector<PatchTensor> patches;
        for (int i = 0; i < 3; ++i) {
            PatchTensor p;
            p.size = 16;
            p.mask = ch_r | ch_d;
            p.data.resize(2 * 16 * 16);
            for (auto& v : p.data) v = static_cast<float>(rng.uniform(-1, 1));
            patches.push_back(std::move(p));
        }
        std::vector<TripletIdx> triplets = {{0, 1, 2, rng.uniform(0.3, 1.5)}};
        std::vector<PairIdx> pairs = {{0, 1}};

        auto eval_loss = [&]() {
            std::vector<Descriptor> ds;
            for (const auto& p : patches) ds.push_back(net.forward(p));
            return total_loss(ds, triplets, pairs).loss;
        };

        std::vector<EmbeddingNet::Cache> caches(3);
        std::vector<Descriptor> ds;
        for (int i = 0; i < 3; ++i) {
            ds.push_back(net.forward(patches[i], &caches[i]));
        }
        auto lr = total_loss(ds, triplets, pairs);
        auto grads = net.zero_gradients();
        for (int i = 0; i < 3; ++i) {
            grads.accumulate(net.backward(lr.grads[i], caches[i]));
        }

        auto params = net.param_tensors();
        auto gts = grads.tensors();
        std::vector<std::pair<double, double>> comps;  // (err^2, an^2)
        int kept = 0, skipped = 0;
        while (kept < 13 && skipped < 40) {
            std::size_t t = rng.index(params.size());
            auto& tensor = *params[t];
            std::size_t i = rng.index(tensor.size());
            float saved = tensor[i];
            auto fd_at = [&](float h) {
                tensor[i] = saved + h;
                double up = eval_loss();
                tensor[i] = saved - h;
                double dn = eval_loss();
                tensor[i] = saved;
                return (up - dn) / (2.0 * h);
            };
            double f1 = fd_at(5e-3f);
            double f2 = fd_at(2.5e-3f);
            if (std::abs(f1 - f2) > 3e-4 * std::max(1.0, std::abs(f1))) {
                ++skipped;
                continue;
            }
            double rf = (4 * f2 - f1) / 3;
            double an = (*gts[t])[i];
            comps.push_back({(rf - an) * (rf - an), an * an});
            ++kept;
        }
        REQUIRE(kept == 13);
        std::sort(comps.begin(), comps.end());
        comps.pop_back();
        double num = 0, den = 0;
        for (const auto& [n, d] : comps) {
            num += n;
            den += d;
        }
        double rel = std::sqrt(num) / std::max(std::sqrt(den), 1e-4);
        worst_rel = std::max(worst_rel, rel);
        ++instances;
        if (rel >= 1e-3) ++bad;
    }
    double secs = std::chrono::duration<double>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
    CHECK(instances >= 20);
    CHECK(bad == 0);
    CHECK(secs < 120.0);
    char buf[128];
    std::snprintf(buf, sizeof buf, "%d instances, worst rel err %.2e, %.1fs",
                  instances, worst_rel, secs);
    verdict(2, instances >= 20 && bad == 0 && secs < 120.0, buf);
}

TEST_CASE("criterion 3: normals oracles") {
    // Tilted plane: depth rises one pixel pitch per row -> 45 degrees.
    int s = 32;
    NormalParams params;
    params.discontinuity = 1.0;
    PatchTensor plane;
    plane.size = s;
    plane.mask = mask_d;
    plane.data.resize(static_cast<std::size_t>(s) * s);
    for (int y = 0; y < s; ++y) {
        for (int x = 0; x < s; ++x) {
            plane.data[static_cast<std::size_t>(y) * s + x] =
                static_cast<float>(0.2 + static_cast<double>(y) / s);
        }
    }
    add_normals(plane, params);
    const float* pnx = plane.plane(ch_nx);
    const float* pny = plane.plane(ch_ny);
    const float* pnz = plane.plane(ch_nz);
    double r2 = std::sqrt(2.0) / 2.0;
    double plane_worst = 0;
    for (int y = 4; y < s - 4; ++y) {
        for (int x = 4; x < s - 4; ++x) {
            std::size_t i = static_cast<std::size_t>(y) * s + x;
            if (plane.data[i] >= 0.999f) continue;
            double err = std::sqrt(pnx[i] * pnx[i] +
                                   (pny[i] + r2) * (pny[i] + r2) +
                                   (pnz[i] - r2) * (pnz[i] - r2));
            plane_worst = std::max(plane_worst, err);
        }
    }
    CHECK(plane_worst < 2e-2);

    // Rendered sphere vs analytic normals, interior pixels only.
    auto mesh = make_procedural_mesh(MeshKind::sphere, 0.12, 7);
    double radius = 0.6, focal = 96.0, cube = 0.4;
    auto pose = make_camera_pose({0, 0, radius}, 0);
    auto view = render(mesh, pose, 64, focal);
    auto patch = extract_patch(view, radius, focal, cube, 64);
    add_normals(patch, {});
    const float* dn = patch.plane(ch_d);
    const float* nx = patch.plane(ch_nx);
    const float* ny = patch.plane(ch_ny);
    const float* nz = patch.plane(ch_nz);
    int ps = patch.size;
    std::vector<double> errors;
    for (int y = 2; y < ps - 2; ++y) {
        for (int x = 2; x < ps - 2; ++x) {
            bool interior = true;
            for (int dy = -2; dy <= 2 && interior; ++dy) {
                for (int dx = -2; dx <= 2 && interior; ++dx) {
                    if (dn[(y + dy) * ps + x + dx] >= 0.99f) interior = false;
                }
            }
            if (!interior) continue;
            double depth_m = radius - cube / 2 + dn[y * ps + x] * cube;
            double px = (x + 0.5 - ps / 2.0) * depth_m / focal;
            double py = -(y + 0.5 - ps / 2.0) * depth_m / focal;
            double sx = px, sy = py, sz = radius - depth_m;
            double n = std::sqrt(sx * sx + sy * sy + sz * sz);
            double dot = (sx * nx[y * ps + x] + sy * ny[y * ps + x] +
                          sz * nz[y * ps + x]) /
                         n;
            errors.push_back(std::acos(std::clamp(dot, -1.0, 1.0)) * 180 /
                             M_PI);
        }
    }
    REQUIRE(errors.size() > 100);
    std::sort(errors.begin(), errors.end());
    double med = errors[errors.size() / 2];
    CHECK(med < 5.0);
    char buf[128];
    std::snprintf(buf, sizeof buf,
                  "plane worst vec err %.3f, sphere median %.2f deg",
                  plane_worst, med);
    verdict(3, plane_worst < 2e-2 && med < 5.0, buf);
}

TEST_CASE("criterion 4: noise properties") {
    // White-noise mean at 64x64.
    auto white = white_noise(64, 3, 17);
    double wmean = 0;
    for (const auto& p : white) {
        for (float v : p) wmean += v;
    }
    wmean /= 3.0 * 64 * 64;
    CHECK(std::abs(wmean - 0.5) < 0.02);

    // Fractal smoothness vs white noise.
    auto mean_delta = [](const std::vector<float>& p, int size) {
        double sum = 0;
        int n = 0;
        for (int y = 0; y < size; ++y) {
            for (int x = 1; x < size; ++x) {
                sum += std::abs(p[y * size + x] - p[y * size + x - 1]);
                ++n;
            }
        }
        return sum / n;
    };
    auto frac = fractal_noise(128, 1, 5, 4, 0.5, 4.0 / 128);
    auto wflat = white_noise(128, 1, 5);
    double df = mean_delta(frac[0], 128);
    double dw = mean_delta(wflat[0], 128);
    CHECK(df < dw / 3.0);

    // Foreground bit-preservation and determinism under every fill kind.
    fs::path dir = scratch_dir("c4_pool");
    std::vector<float> rgb(3 * 64 * 64, 0.3f);
    std::vector<float> depth(64 * 64, 0.8f);
    write_ppm((dir / "bg.ppm").string(), 64, 64, rgb);
    write_pgm16((dir / "bg.pgm").string(), 64, 64, depth);
    auto pool = load_background_pool(dir.string());

    auto mesh = make_procedural_mesh(MeshKind::torus, 0.15, 3);
    auto pose = make_camera_pose(Vec3{0.5, 0.5, 1}.normalized() * 0.6, 0);
    auto patch =
        extract_patch(render(mesh, pose, 64, 96.0), 0.6, 96.0, 0.4, 32);
    add_normals(patch, {});
    auto mask = foreground_mask(patch);

    bool preserved = true, deterministic = true;
    for (NoiseKind kind : {NoiseKind::white, NoiseKind::shapes,
                           NoiseKind::fractal, NoiseKind::real}) {
        NoiseSpec spec;
        spec.kind = kind;
        spec.seed = 31;
        spec.pool = &pool;
        PatchTensor filled = patch;
        fill_background(filled, mask, spec);
        for (Channel c :
             {ch_r, ch_g, ch_b, ch_d, ch_nx, ch_ny, ch_nz}) {
            const float* before = patch.plane(c);
            const float* after = filled.plane(c);
            for (std::size_t i = 0; i < mask.size(); ++i) {
                if (mask[i] && before[i] != after[i]) preserved = false;
            }
        }
        PatchTensor filled2 = patch;
        fill_background(filled2, mask, spec);
        if (filled.data != filled2.data) deterministic = false;
    }
    CHECK(preserved);
    CHECK(deterministic);
    fs::remove_all(dir);
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "white mean %.3f, fractal |d| %.4f vs white %.4f, "
                  "foreground %s, deterministic %s",
                  wmean, df, dw, preserved ? "intact" : "CHANGED",
                  deterministic ? "yes" : "NO");
    verdict(4,
            std::abs(wmean - 0.5) < 0.02 && df < dw / 3.0 && preserved &&
                deterministic,
            buf);
}

TEST_CASE("criterion 5: dynamic vs static margin trend") {
    auto t0 = std::chrono::steady_clock::now();
    std::vector<double> dm, sm;
    for (std::uint64_t seed : kSeeds) {
        dm.push_back(
            train_run(preset_variant("testB_margin", "dynamic_d3"), seed)
                .rate());
        sm.push_back(
            train_run(preset_variant("testB_margin", "static_d3"), seed)
                .rate());
    }
    double dm_med = median3(dm), sm_med = median3(sm);
    double secs = std::chrono::duration<double>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
    CHECK(dm_med >= 90.0);
    CHECK(sm_med < 90.0);
    CHECK(dm_med - sm_med >= 10.0);
    CHECK(secs < 900.0);
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "dynamic median %.1f%% vs static %.1f%% (gap %.1f), %.0fs",
                  dm_med, sm_med, dm_med - sm_med, secs);
    verdict(5,
            dm_med >= 90.0 && sm_med < 90.0 && dm_med - sm_med >= 10.0 &&
                secs < 900.0,
            buf);
}

TEST_CASE("criterion 6: in-plane training trend") {
    // Both runs are scored on in-plane-rotated pseudo-real test views; the
    // baseline trained without in-plane rotations keeps its own template DB.
    std::vector<double> with_ip, without_ip;
    for (std::uint64_t seed : kSeeds) {
        Run on =
            train_run(preset_variant("testA_inplane", "baseline_inplane"),
                      seed);
        Run off =
            train_run(preset_variant("testA_inplane", "baseline"), seed);
        with_ip.push_back(on.rate());
        without_ip.push_back(off.rate_on(on.test));
    }
    double on_med = median3(with_ip), off_med = median3(without_ip);
    CHECK(on_med - off_med >= 10.0);
    char buf[128];
    std::snprintf(buf, sizeof buf,
                  "in-plane median %.1f%% vs none %.1f%% (gap %.1f)", on_med,
                  off_med, on_med - off_med);
    verdict(6, on_med - off_med >= 10.0, buf);
}

TEST_CASE("criterion 7: channel-modality trend") {
    std::vector<double> d_only, n_only, nd;
    for (std::uint64_t seed : kSeeds) {
        d_only.push_back(
            train_run(preset_variant("testD_channels", "d"), seed).rate());
        n_only.push_back(
            train_run(preset_variant("testD_channels", "n"), seed).rate());
        nd.push_back(
            train_run(preset_variant("testD_channels", "nd"), seed).rate());
    }
    double dm = median3(d_only), nm = median3(n_only), ndm = median3(nd);
    bool ok = ndm >= nm - 2.0 && nm >= dm - 2.0 && ndm - dm > 0.0;
    CHECK(ndm >= nm - 2.0);
    CHECK(nm >= dm - 2.0);
    CHECK(ndm - dm > 0.0);
    char buf[128];
    std::snprintf(buf, sizeof buf,
                  "medians d %.1f%%, n %.1f%%, n+d %.1f%%", dm, nm, ndm);
    verdict(7, ok, buf);
}

TEST_CASE("criterion 8: background-noise ordering") {
    fs::path dir = scratch_dir("c8");
    fs::path pool_dir = dir / "backgrounds";
    std::vector<double> white, shapes, fractal, real;
    for (std::uint64_t seed : kSeeds) {
        for (auto [name, acc] :
             std::initializer_list<std::pair<const char*, std::vector<double>*>>{
                 {"white", &white},
                 {"shapes", &shapes},
                 {"fractal", &fractal},
                 {"real", &real}}) {
            Config cfg = preset_variant("testC_noise", name);
            cfg.dataset.background_pool_dir = pool_dir.string();
            acc->push_back(train_run(cfg, seed).rate());
        }
    }
    double w = median3(white), s = median3(shapes), f = median3(fractal),
           r = median3(real);
    bool ok = w < s && w < f && w < r && s <= f && f <= r;
    CHECK(w < s);
    CHECK(w < f);
    CHECK(w < r);
    CHECK(s <= f);
    CHECK(f <= r);
    fs::remove_all(dir);
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "medians white %.1f%%, shapes %.1f%%, fractal %.1f%%, "
                  "real %.1f%%",
                  w, s, f, r);
    verdict(8, ok, buf);
}

TEST_CASE("criterion 9: retrieval exactness") {
    Rng rng(5);
    std::vector<DbEntry> entries(800);
    for (auto& e : entries) {
        e.descriptor.resize(16);
        for (auto& v : e.descriptor) {
            v = static_cast<float>(rng.uniform(-1, 1));
        }
        e.class_id = static_cast<int>(rng.index(6));
        Vec3 axis{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        e.pose = quat_from_axis_angle(axis.normalized(), rng.uniform(0, 3));
    }
    DescriptorDB db(entries);
    int mismatches = 0;
    for (int trial = 0; trial < 10000; ++trial) {
        Descriptor q(16);
        for (auto& v : q) v = static_cast<float>(rng.uniform(-1.2, 1.2));
        int k = 1 + static_cast<int>(rng.index(8));
        auto tree = db.query(q, k);
        auto brute = db.query_brute(q, k);
        REQUIRE(tree.size() == brute.size());
        for (std::size_t i = 0; i < tree.size(); ++i) {
            if (tree[i].index != brute[i].index ||
                tree[i].distance != brute[i].distance) {
                ++mismatches;
            }
        }
    }
    CHECK(mismatches == 0);
    char buf[96];
    std::snprintf(buf, sizeof buf, "10000 queries, %d mismatches",
                  mismatches);
    verdict(9, mismatches == 0, buf);
}

TEST_CASE("criterion 10: end-to-end determinism") {
    fs::path dir = scratch_dir("c10");
    Config cfg;
    cfg.dataset.objects = {{MeshKind::sphere, 0.10, 101},
                           {MeshKind::box, 0.18, 102}};
    cfg.dataset.coarse_level = 0;
    cfg.dataset.fine_level = 1;
    cfg.dataset.in_plane_min_deg = 0;
    cfg.dataset.in_plane_max_deg = 0;
    cfg.dataset.image_size = 32;
    cfg.dataset.focal_px = 48;
    cfg.dataset.patch_size = 16;
    cfg.dataset.pseudo_real_per_object = 8;
    cfg.dataset.seed = 11;
    cfg.train.seed = 11;
    cfg.train.epochs = 2;
    cfg.descriptor_dim = 3;
    cfg.validate();
    fs::path cfg_path = dir / "run.cfg";
    {
        std::ofstream f(cfg_path);
        f << emit_config(cfg);
    }

    auto run_pipeline = [&](const std::string& leaf) {
        fs::path out = dir / leaf;
        fs::create_directories(out);
        std::string cli = PML_CLI_PATH;
        std::string quiet = " > /dev/null 2>&1";
        auto sh = [&](const std::string& cmd) {
            REQUIRE(std::system((cmd + quiet).c_str()) == 0);
        };
        sh(cli + " gen --config " + cfg_path.string() + " --out " +
           out.string());
        sh(cli + " train --config " + cfg_path.string() + " --data " +
           out.string() + " --out " + (out / "net.pmnet").string() +
           " --report " + (out / "report.csv").string());
        sh(cli + " eval --checkpoint " + (out / "net.pmnet").string() +
           " --data " + out.string() + " --out " +
           (out / "eval.csv").string());
        return out;
    };
    fs::path a = run_pipeline("a");
    fs::path b = run_pipeline("b");

    int differing = 0;
    std::vector<std::string> files = {"templates.pmds", "train.pmds",
                                      "test.pmds",      "net.pmnet",
                                      "report.csv",     "eval.csv"};
    for (const auto& f : files) {
        if (read_bytes(a / f) != read_bytes(b / f)) ++differing;
    }
    CHECK(differing == 0);
    fs::remove_all(dir);
    char buf[96];
    std::snprintf(buf, sizeof buf, "%zu artifacts compared, %d differ",
                  files.size(), differing);
    verdict(10, differing == 0, buf);
}

TEST_CASE("criterion 11: eval invariants and self-retrieval") {
    DatasetConfig dc;
    dc.objects = {{MeshKind::sphere, 0.10, 101},
                  {MeshKind::box, 0.18, 102},
                  {MeshKind::cone, 0.16, 103}};
    dc.coarse_level = 1;
    dc.fine_level = 2;
    dc.image_size = 64;
    dc.focal_px = 96;
    dc.patch_size = 32;
    dc.pseudo_real_per_object = 10;
    dc.seed = 13;
    dc.validate();
    SampleSet templates = build_template_set(dc);
    SampleSet training = build_training_set(dc, templates);
    SampleSet test = build_test_set(dc, templates, training);

    EmbeddingNet net(32, 4, 16);
    net.init_params(3);
    auto template_inputs = assemble_set(templates, Modality::rgbd);

    // Self-retrieval: each template's nearest neighbor is itself.
    auto db = build_db(net, template_inputs);
    EvalResult self = evaluate(net, db, template_inputs);
    self.validate();
    // arccos rounding puts the self-match angle within ~1e-7 deg of zero
    bool self_ok = self.classification_rate == 1.0 &&
                   self.mean_ang_err_correct_deg < 1e-6;
    CHECK(self.classification_rate == 1.0);
    CHECK(self.mean_ang_err_correct_deg < 1e-6);

    // Invariants hold on an ordinary (untrained) evaluation too: the
    // tolerance histogram is monotone and bounded by the classification
    // rate at many thresholds.
    auto test_inputs = assemble_set(test, Modality::rgbd);
    EvalResult r =
        evaluate(net, db, test_inputs, {5, 10, 20, 40, 80, 120, 180});
    bool invariants_ok = true;
    try {
        r.validate();
        double prev = 0;
        for (double h : r.tolerance_hist) {
            if (h < prev || h > r.classification_rate + 1e-12) {
                invariants_ok = false;
            }
            prev = h;
        }
    } catch (const pml::error&) {
        invariants_ok = false;
    }
    CHECK(invariants_ok);
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "self-retrieval %.0f%% / %.2f deg, histogram monotone and "
                  "bounded: %s",
                  100.0 * self.classification_rate,
                  self.mean_ang_err_correct_deg, invariants_ok ? "yes" : "NO");
    verdict(11, self_ok && invariants_ok, buf);
}
