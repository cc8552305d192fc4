#include <doctest.h>

#include <cmath>
#include <set>

#include "pmlearn/geometry.hpp"
#include "pmlearn/rng.hpp"

using namespace pml;

namespace {

Quaternion random_unit_quat(Rng& rng) {
    Quaternion q{rng.gaussian(), rng.gaussian(), rng.gaussian(), rng.gaussian()};
    return q.normalized();
}

// Independent oracle: rotation angle from the relative rotation matrix trace.
double matrix_angle(const Quaternion& a, const Quaternion& b) {
    auto ra = a.to_matrix();
    auto rb = b.to_matrix();
    // trace(Ra^T Rb)
    double tr = 0;
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            tr += ra[j * 3 + i] * rb[j * 3 + i];
        }
    }
    return std::acos(std::clamp((tr - 1.0) / 2.0, -1.0, 1.0));
}

// Brute-force vertex count: dedup by pairwise angular separation.
int dedup_vertex_count(const ViewSphere& s) {
    std::vector<Vec3> uniq;
    for (const auto& v : s.vertices) {
        bool dup = false;
        for (const auto& u : uniq) {
            if (std::acos(std::clamp(u.dot(v), -1.0, 1.0)) <= 1e-6) {
                dup = true;
                break;
            }
        }
        if (!dup) uniq.push_back(v);
    }
    return static_cast<int>(uniq.size());
}

}  // namespace

TEST_CASE("icosahedron subdivision vertex counts") {
    CHECK(subdivide_icosahedron(0).vertices.size() == 12);
    CHECK(subdivide_icosahedron(2).vertices.size() == 162);
    CHECK(subdivide_icosahedron(3).vertices.size() == 642);
    for (int level = 0; level <= 4; ++level) {
        auto s = subdivide_icosahedron(level);
        int expected = 10 * (1 << (2 * level)) + 2;
        CHECK(static_cast<int>(s.vertices.size()) == expected);
        CHECK(dedup_vertex_count(s) == expected);
        for (const auto& v : s.vertices) {
            CHECK(std::abs(v.norm() - 1.0) <= 1e-9);
        }
    }
}

TEST_CASE("subdivision level bounds") {
    CHECK_THROWS_AS(subdivide_icosahedron(-1), bounds_error);
    CHECK_THROWS_AS(subdivide_icosahedron(7), bounds_error);
}

TEST_CASE("hemisphere filtering keeps upper vertices only") {
    auto full = subdivide_icosahedron(2, false);
    auto hemi = subdivide_icosahedron(2, true);
    CHECK(hemi.vertices.size() < full.vertices.size());
    for (const auto& v : hemi.vertices) CHECK(v.z >= -1e-9);
}

TEST_CASE("quat_angle basics") {
    Quaternion id{1, 0, 0, 0};
    CHECK(quat_angle(id, id) == doctest::Approx(0.0));

    // 90 degrees about z
    Quaternion qz{std::cos(M_PI / 4), 0, 0, std::sin(M_PI / 4)};
    CHECK(quat_angle(id, qz) == doctest::Approx(M_PI / 2).epsilon(1e-9));

    // 180 degrees about x
    Quaternion qx{0, 1, 0, 0};
    CHECK(quat_angle(id, qx) == doctest::Approx(M_PI).epsilon(1e-9));

    CHECK_THROWS_AS(quat_angle(Quaternion{2, 0, 0, 0}, id), invariant_error);
}

TEST_CASE("quat_angle matches rotation-matrix oracle on 1000 random pairs") {
    Rng rng(42);
    for (int i = 0; i < 1000; ++i) {
        Quaternion a = random_unit_quat(rng);
        Quaternion b = random_unit_quat(rng);
        double ours = quat_angle(a, b);
        double oracle = matrix_angle(a, b);
        CHECK(std::abs(ours - oracle) < 1e-6);
        CHECK(quat_angle(b, a) == doctest::Approx(ours).epsilon(1e-12));
        CHECK(ours >= 0.0);
        CHECK(ours <= M_PI + 1e-12);
    }
}

TEST_CASE("quat_angle is sign-flip invariant") {
    Rng rng(7);
    for (int i = 0; i < 100; ++i) {
        Quaternion a = random_unit_quat(rng);
        Quaternion na{-a.w, -a.x, -a.y, -a.z};
        CHECK(quat_angle(a, na) == doctest::Approx(0.0));
    }
}

TEST_CASE("quat_from_axis_angle") {
    Quaternion id = quat_from_axis_angle({0, 0, 1}, 0);
    CHECK(id.w == doctest::Approx(1.0));
    CHECK(id.z == doctest::Approx(0.0));

    Quaternion half = quat_from_axis_angle({0, 0, 1}, M_PI);
    CHECK(half.w == doctest::Approx(0.0));
    CHECK(half.z == doctest::Approx(1.0));

    // composing two 90-degree z rotations gives a 180-degree rotation
    Quaternion q90 = quat_from_axis_angle({0, 0, 1}, M_PI / 2);
    Quaternion q180 = q90 * q90;
    CHECK(quat_angle(Quaternion{1, 0, 0, 0}, q180) ==
          doctest::Approx(M_PI).epsilon(1e-9));

    CHECK_THROWS_AS(quat_from_axis_angle({0, 0, 0}, 1.0), invariant_error);

    Rng rng(3);
    for (int i = 0; i < 50; ++i) {
        double angle = rng.uniform(0, M_PI);
        Quaternion q = quat_from_axis_angle({0, 0, 1}, angle);
        CHECK(quat_angle(Quaternion{1, 0, 0, 0}, q) ==
              doctest::Approx(angle).epsilon(1e-9));
    }
}

TEST_CASE("enumerate_poses counts and look-at invariant") {
    auto sphere = subdivide_icosahedron(2, false);
    auto poses = enumerate_poses(sphere, -45, 45, 15, 0.6);
    CHECK(poses.size() == 162 * 7);

    auto two = enumerate_poses(sphere, -45, 45, 90, 0.6);
    CHECK(two.size() == 162 * 2);

    auto one = enumerate_poses(sphere, 0, 0, 15, 0.6);
    CHECK(one.size() == 162);

    for (std::size_t i = 0; i < poses.size(); i += 37) {
        const auto& p = poses[i];
        Vec3 fwd = p.forward();
        Vec3 want = (p.position * -1.0).normalized();
        CHECK((fwd - want).norm() < 1e-6);
        CHECK(p.orientation.is_unit(1e-9));
        CHECK(std::abs(p.position.norm() - 0.6) < 1e-9);
    }

    CHECK_THROWS_AS(enumerate_poses(sphere, -45, 45, 0, 0.6), bounds_error);
    CHECK_THROWS_AS(enumerate_poses(sphere, 45, -45, 15, 0.6), bounds_error);
}

TEST_CASE("in-plane rotation changes orientation but not viewpoint") {
    Vec3 pos = Vec3{1, 2, 3}.normalized() * 0.6;
    auto p0 = make_camera_pose(pos, 0);
    auto p45 = make_camera_pose(pos, 45);
    CHECK((p0.forward() - p45.forward()).norm() < 1e-9);
    CHECK(quat_angle(p0.orientation, p45.orientation) ==
          doctest::Approx(45.0 * M_PI / 180).epsilon(1e-6));
}
