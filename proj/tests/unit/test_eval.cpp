#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "pmlearn/dataset.hpp"
#include "pmlearn/eval.hpp"
#include "pmlearn/train.hpp"

using namespace pml;

namespace {

SampleSet& small_templates() {
    static SampleSet set = [] {
        DatasetConfig cfg;
        cfg.objects = {{MeshKind::sphere, 0.10, 1}, {MeshKind::cone, 0.15, 2}};
        cfg.coarse_level = 1;
        cfg.fine_level = 2;
        cfg.in_plane_min_deg = 0;
        cfg.in_plane_max_deg = 0;
        cfg.in_plane_stride_deg = 90;
        cfg.image_size = 32;
        cfg.focal_px = 48;
        cfg.patch_size = 16;
        cfg.pseudo_real_per_object = 0;
        return build_template_set(cfg);
    }();
    return set;
}

}  // namespace

TEST_CASE("self-retrieval scores perfectly") {
    auto& templates = small_templates();
    auto inputs = assemble_set(templates, Modality::rgbd);
    EmbeddingNet net(16, 4, 16);
    net.init_params(3);
    auto db = build_db(net, inputs);
    auto r = evaluate(net, db, inputs);
    CHECK(r.classification_rate == doctest::Approx(1.0));
    CHECK(r.mean_ang_err_correct_deg == doctest::Approx(0.0).epsilon(1e-9));
    for (double h : r.tolerance_hist) CHECK(h == doctest::Approx(1.0));
    for (const auto& [cls, rate] : r.per_class_rate) {
        CHECK(rate == doctest::Approx(1.0));
    }
}

TEST_CASE("oracle embedding: pose error bounded by template coverage") {
    // Embed each sample by its true pose quaternion (sign-canonical); 1-NN
    // in that space retrieves a nearby-pose template of the right class.
    auto& templates = small_templates();
    std::vector<DbEntry> entries;
    for (const auto& s : templates.samples) {
        Quaternion q = s.pose;
        if (q.w < 0) q = {-q.w, -q.x, -q.y, -q.z};
        DbEntry e;
        e.descriptor = {float(q.w), float(q.x), float(q.y), float(q.z),
                        float(s.class_id * 10)};
        e.class_id = s.class_id;
        e.pose = s.pose;
        entries.push_back(e);
    }
    DescriptorDB db(entries);
    int correct = 0;
    double max_err = 0;
    Rng rng(17);
    for (int trial = 0; trial < 200; ++trial) {
        int pick = static_cast<int>(rng.index(entries.size()));
        // jitter the pose a little and query
        Quaternion q = templates.samples[pick].pose;
        Vec3 axis{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        Quaternion j = quat_from_axis_angle(axis.normalized(),
                                            rng.uniform(0, 0.05));
        Quaternion p = q * j;
        if (p.w < 0) p = {-p.w, -p.x, -p.y, -p.z};
        Descriptor d = {float(p.w), float(p.x), float(p.y), float(p.z),
                        float(templates.samples[pick].class_id * 10)};
        auto hits = db.query(d, 1);
        const auto& nn = db.entry(hits[0].index);
        if (nn.class_id == templates.samples[pick].class_id) {
            ++correct;
            max_err = std::max(max_err, quat_angle(p, nn.pose));
        }
    }
    CHECK(correct == 200);
    // Sign canonicalization is discontinuous near w = 0, so a handful of
    // equatorial poses retrieve a slightly farther template; the bound is
    // still far below the coarse sampling gap.
    CHECK(max_err < 1.0);
}

TEST_CASE("random embedding classifies near chance") {
    auto& templates = small_templates();
    auto inputs = assemble_set(templates, Modality::rgbd);
    // random descriptors detached from the patches
    Rng rng(23);
    std::vector<DbEntry> entries;
    for (const auto& s : inputs) {
        DbEntry e;
        e.descriptor = {float(rng.uniform(-1, 1)), float(rng.uniform(-1, 1)),
                        float(rng.uniform(-1, 1))};
        e.class_id = s.class_id;
        e.pose = s.pose;
        entries.push_back(e);
    }
    DescriptorDB db(entries);
    int correct = 0, total = 0;
    for (const auto& s : inputs) {
        Descriptor q = {float(rng.uniform(-1, 1)), float(rng.uniform(-1, 1)),
                        float(rng.uniform(-1, 1))};
        auto hits = db.query(q, 1);
        if (db.entry(hits[0].index).class_id == s.class_id) ++correct;
        ++total;
    }
    double rate = double(correct) / total;
    CHECK(rate > 0.25);  // two balanced classes -> chance is 0.5
    CHECK(rate < 0.75);
}

TEST_CASE("EvalResult invariants are enforced") {
    EvalResult r;
    r.classification_rate = 0.8;
    r.tolerance_hist = {0.2, 0.5, 0.7};
    CHECK_NOTHROW(r.validate());
    r.tolerance_hist = {0.5, 0.4, 0.7};  // not monotone
    CHECK_THROWS_AS(r.validate(), invariant_error);
    r.tolerance_hist = {0.2, 0.5, 0.9};  // exceeds classification rate
    CHECK_THROWS_AS(r.validate(), invariant_error);
}

TEST_CASE("empty test set is rejected") {
    auto& templates = small_templates();
    auto inputs = assemble_set(templates, Modality::rgbd);
    EmbeddingNet net(16, 4, 3);
    net.init_params(1);
    auto db = build_db(net, inputs);
    std::vector<Sample> empty;
    CHECK_THROWS_AS(evaluate(net, db, empty), config_error);
}

TEST_CASE("eval csv round trip") {
    EvalResult r;
    r.classification_rate = 0.875;
    r.tolerance_hist = {0.125, 0.5, 0.75};
    r.mean_ang_err_correct_deg = 12.25;
    std::string path = "test_eval.csv";
    write_eval_csv(path, {{"runA", r}});
    auto rows = read_eval_csv(path);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].first == "runA");
    CHECK(rows[0].second.classification_rate == r.classification_rate);
    CHECK(rows[0].second.tolerance_hist == r.tolerance_hist);
    CHECK(rows[0].second.mean_ang_err_correct_deg ==
          r.mean_ang_err_correct_deg);
    std::remove(path.c_str());
}

TEST_CASE("curves csv layout") {
    std::vector<EpochPoint> pts = {{0, 2.0, 0.5, 0.1, 0.2, 0.3, 25.0},
                                   {1, 1.0, 0.8, 0.3, 0.5, 0.7, 15.0}};
    std::string path = "test_curves.csv";
    write_curves_csv(path, {{"dm", pts}, {"sm", pts}});
    std::ifstream is(path);
    std::string line;
    std::getline(is, line);
    CHECK(line == "epoch,run,loss,class_rate,tol10,tol20,tol40,mean_err_deg");
    int rows = 0;
    while (std::getline(is, line)) {
        if (!line.empty()) ++rows;
    }
    CHECK(rows == 4);
    std::remove(path.c_str());
}

TEST_CASE("table formatting names every metric column") {
    EvalResult r;
    r.classification_rate = 1.0;
    r.tolerance_hist = {1.0, 1.0, 1.0};
    auto table = eval_table({{"self", r}});
    CHECK(table.find("class") != std::string::npos);
    CHECK(table.find("mean_err") != std::string::npos);
    CHECK(table.find("self") != std::string::npos);
}
