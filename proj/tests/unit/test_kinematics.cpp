#include <catch2/catch_amalgamated.hpp>

#include "artik/category.hpp"
#include "artik/kinematics.hpp"
#include "artik/rng.hpp"
#include "support/test_meshes.hpp"

using namespace artik;

namespace {

JointSpec revolute_z(double lo = -360.0, double hi = 360.0, const Vec3& origin = Vec3(0, 0, 0)) {
    JointSpec s;
    s.kind = JointKind::kRevolute;
    s.axis = Vec3(0, 0, 1);
    s.origin = origin;
    s.psi_min = lo;
    s.psi_max = hi;
    s.moving_part_ids = {1};
    return s;
}

JointSpec prismatic_x(double lo = 0.0, double hi = 10.0) {
    JointSpec s;
    s.kind = JointKind::kPrismatic;
    s.axis = Vec3(1, 0, 0);
    s.psi_min = lo;
    s.psi_max = hi;
    s.moving_part_ids = {1};
    return s;
}

}  // namespace

TEST_CASE("transform_for: quarter turn about z") {
    const auto tf = transform_for(revolute_z(), 90.0);
    validate_transform(tf);
    REQUIRE((tf.apply(Vec3(1, 0, 0)) - Vec3(0, 1, 0)).norm() < 1e-12);
}

TEST_CASE("transform_for: prismatic zero displacement is the identity") {
    const auto tf = transform_for(prismatic_x(), 0.0);
    REQUIRE((tf.rotation - Mat3::Identity()).norm() < 1e-15);
    REQUIRE(tf.translation.norm() < 1e-15);
}

TEST_CASE("transform_for: half turn about an offset axis") {
    // Rotating (2,0,0) by 180 degrees about the vertical axis through
    // (1,0,0): translate to (1,0,0), flip to (-1,0,0), translate back to
    // (0,0,0).
    const auto tf = transform_for(revolute_z(-360, 360, Vec3(1, 0, 0)), 180.0);
    REQUIRE(tf.apply(Vec3(2, 0, 0)).norm() < 1e-12);
}

TEST_CASE("transform_for: range errors name the joint and bounds") {
    auto spec = revolute_z(0.0, 90.0);
    spec.name = "lid";
    REQUIRE_THROWS_AS(transform_for(spec, 90.5), RangeError);
    try {
        transform_for(spec, -1.0);
        FAIL("expected RangeError");
    } catch (const RangeError& e) {
        const std::string msg = e.what();
        REQUIRE(msg.find("lid") != std::string::npos);
        REQUIRE(msg.find("90") != std::string::npos);
    }
}

TEST_CASE("transform_for composition for revolute joints") {
    const auto spec = revolute_z(-360, 360, Vec3(0.3, -0.2, 0.0));
    Rng rng(3);
    for (int i = 0; i < 50; ++i) {
        const double a = rng.uniform(-100, 100), b = rng.uniform(-100, 100);
        const auto ab = transform_for(spec, a + b);
        const auto composed = transform_for(spec, b).compose_after(transform_for(spec, a));
        REQUIRE((ab.rotation - composed.rotation).cwiseAbs().maxCoeff() < 1e-9);
        REQUIRE((ab.translation - composed.translation).norm() < 1e-9);
    }
}

TEST_CASE("transform_for continuity bounds") {
    const auto rev = revolute_z(0, 180);
    const auto pri = prismatic_x(0, 10);
    Rng rng(8);
    for (int i = 0; i < 200; ++i) {
        const double p1 = rng.uniform(0, 180);
        const double p2 = std::min(180.0, p1 + rng.uniform(0, 1e-3));
        const Vec3 x(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2));
        const double r = std::hypot(x.x(), x.y());  // distance to the z axis
        const Vec3 dx = transform_for(rev, p1).apply(x) - transform_for(rev, p2).apply(x);
        REQUIRE(dx.norm() <= r * deg_to_rad(std::abs(p1 - p2)) + std::abs(p1 - p2) + 1e-12);

        const double d1 = rng.uniform(0, 10), d2 = rng.uniform(0, 10);
        const Vec3 dp = transform_for(pri, d1).apply(x) - transform_for(pri, d2).apply(x);
        REQUIRE(dp.norm() == Catch::Approx(std::abs(d1 - d2)).margin(1e-12));
    }
}

TEST_CASE("joint validation enforces the documented invariants") {
    auto spec = revolute_z();
    REQUIRE_NOTHROW(validate_joint(spec, 2));
    auto bad_axis = spec;
    bad_axis.axis = Vec3(0, 0, 2);
    REQUIRE_THROWS_AS(validate_joint(bad_axis, 2), ConfigError);
    auto bad_range = spec;
    bad_range.psi_max = bad_range.psi_min;
    REQUIRE_THROWS_AS(validate_joint(bad_range, 2), ConfigError);
    auto empty_moving = spec;
    empty_moving.moving_part_ids = {};
    REQUIRE_THROWS_AS(validate_joint(empty_moving, 2), ConfigError);
    auto all_moving = spec;
    all_moving.moving_part_ids = {0, 1};
    REQUIRE_THROWS_AS(validate_joint(all_moving, 2), ConfigError);
}

TEST_CASE("pose_model: identity at zero, centroid transform at 90 degrees") {
    ArticulatedModel model = make_builtin_hinge();

    const auto at_zero = pose_model(model, 0.0);
    REQUIRE(at_zero.size() == model.parts.size());
    for (std::size_t p = 0; p < model.parts.size(); ++p) {
        REQUIRE(at_zero[p].vertices.size() == model.parts[p].vertices.size());
        REQUIRE(at_zero[p].faces.size() == model.parts[p].faces.size());
        for (std::size_t v = 0; v < at_zero[p].vertices.size(); ++v)
            REQUIRE(at_zero[p].vertices[v] == model.parts[p].vertices[v]);
    }

    const auto posed = pose_model(model, 90.0);
    Vec3 centroid_before = Vec3::Zero(), centroid_after = Vec3::Zero();
    for (const auto& v : model.parts[1].vertices) centroid_before += v;
    for (const auto& v : posed[1].vertices) centroid_after += v;
    centroid_before /= static_cast<double>(model.parts[1].vertices.size());
    centroid_after /= static_cast<double>(posed[1].vertices.size());
    const auto tf = transform_for(model.joint, 90.0);
    REQUIRE((tf.apply(centroid_before) - centroid_after).norm() < 1e-12);

    // static part untouched
    for (std::size_t v = 0; v < posed[0].vertices.size(); ++v)
        REQUIRE(posed[0].vertices[v] == model.parts[0].vertices[v]);
}

TEST_CASE("pose_model: prismatic drawer shifts the moving bounding box by d*axis") {
    ArticulatedModel model = make_builtin_drawer();
    const double d = 0.37;
    const auto posed = pose_model(model, d);
    const Aabb before = model.parts[1].bounds();
    const Aabb after = posed[1].bounds();
    REQUIRE((after.lo - (before.lo + d * model.joint.axis)).norm() < 1e-12);
    REQUIRE((after.hi - (before.hi + d * model.joint.axis)).norm() < 1e-12);
    for (std::size_t v = 0; v < posed[0].vertices.size(); ++v)
        REQUIRE(posed[0].vertices[v] == model.parts[0].vertices[v]);
}

TEST_CASE("pose_model preserves rigidity (pairwise vertex distances)") {
    ArticulatedModel model = make_builtin_hinge();
    Rng rng(4);
    for (double psi : {13.7, 61.2, 119.0}) {
        const auto posed = pose_model(model, psi);
        for (int trial = 0; trial < 200; ++trial) {
            const auto i = rng.uniform_index(model.parts[1].vertices.size());
            const auto j = rng.uniform_index(model.parts[1].vertices.size());
            const double before = (model.parts[1].vertices[i] - model.parts[1].vertices[j]).norm();
            const double after = (posed[1].vertices[i] - posed[1].vertices[j]).norm();
            REQUIRE(after == Catch::Approx(before).margin(1e-9));
        }
    }
}

TEST_CASE("pose_model propagates range errors") {
    ArticulatedModel model = make_builtin_hinge();
    REQUIRE_THROWS_AS(pose_model(model, 150.0), RangeError);
}
