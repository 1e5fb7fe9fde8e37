#include <catch2/catch_amalgamated.hpp>

#include "artik/anomaly.hpp"
#include "artik/category.hpp"
#include "support/test_meshes.hpp"

using namespace artik;

namespace {

// A flat plate with interior vertices whose normals are exactly +/-z on the
// large faces.
std::vector<TriangleMesh> plate_parts() {
    return {make_box(Vec3(-0.5, -0.5, -0.06), Vec3(0.5, 0.5, 0.06), 0.05),
            make_box(Vec3(2.0, -0.5, -0.06), Vec3(3.0, 0.5, 0.06), 0.05)};
}

AnomalySpec spec_at_top_center(AnomalyKind kind, double radius, double magnitude) {
    AnomalySpec spec;
    spec.kind = kind;
    spec.center = Vec3(0.0, 0.0, 0.06);  // lattice vertex on the top face
    spec.radius = radius;
    spec.magnitude = magnitude;
    spec.target_part = 0;
    spec.seed = 99;
    return spec;
}

}  // namespace

TEST_CASE("inject_anomaly: zero magnitude is the identity for every kind") {
    const auto parts = plate_parts();
    for (AnomalyKind kind : all_anomaly_kinds()) {
        const auto out = inject_anomaly(parts, spec_at_top_center(kind, 0.12, 0.0));
        REQUIRE(out.size() == parts.size());
        for (std::size_t p = 0; p < parts.size(); ++p) {
            REQUIRE(out[p].vertices.size() == parts[p].vertices.size());
            for (std::size_t v = 0; v < parts[p].vertices.size(); ++v)
                REQUIRE(out[p].vertices[v] == parts[p].vertices[v]);
        }
    }
}

TEST_CASE("dent: center vertex moves exactly magnitude inward") {
    const auto parts = plate_parts();
    const auto spec = spec_at_top_center(AnomalyKind::kDent, 0.15, 0.05);
    const auto out = inject_anomaly(parts, spec);

    // Find the vertex at the center in the original part.
    std::size_t center_idx = parts[0].vertices.size();
    for (std::size_t v = 0; v < parts[0].vertices.size(); ++v)
        if ((parts[0].vertices[v] - spec.center).norm() < 1e-12) center_idx = v;
    REQUIRE(center_idx < parts[0].vertices.size());
    const Vec3 moved = out[0].vertices[center_idx];
    REQUIRE((moved - (spec.center - Vec3(0, 0, 0.05))).norm() < 1e-12);
}

TEST_CASE("bulge mirrors dent outward") {
    const auto parts = plate_parts();
    const auto spec = spec_at_top_center(AnomalyKind::kBulge, 0.15, 0.05);
    const auto out = inject_anomaly(parts, spec);
    std::size_t center_idx = 0;
    for (std::size_t v = 0; v < parts[0].vertices.size(); ++v)
        if ((parts[0].vertices[v] - spec.center).norm() < 1e-12) center_idx = v;
    REQUIRE((out[0].vertices[center_idx] - (spec.center + Vec3(0, 0, 0.05))).norm() < 1e-12);
}

TEST_CASE("support bound: vertices beyond the radius never move") {
    const auto parts = plate_parts();
    for (AnomalyKind kind : all_anomaly_kinds()) {
        auto spec = spec_at_top_center(kind, 0.13, kind == AnomalyKind::kBend ? 0.25 : 0.05);
        spec.seed = 1234;
        const auto out = inject_anomaly(parts, spec);
        // The untargeted part is bit-identical.
        for (std::size_t v = 0; v < parts[1].vertices.size(); ++v)
            REQUIRE(out[1].vertices[v] == parts[1].vertices[v]);
        // Original vertices outside the ball are bit-identical (missing may
        // renumber, so match by position lookup).
        if (kind == AnomalyKind::kMissing) continue;
        for (std::size_t v = 0; v < parts[0].vertices.size(); ++v) {
            if ((parts[0].vertices[v] - spec.center).norm() >= spec.radius)
                REQUIRE(out[0].vertices[v] == parts[0].vertices[v]);
        }
    }
}

TEST_CASE("every kind preserves watertightness and validity") {
    const auto parts = plate_parts();
    for (AnomalyKind kind : all_anomaly_kinds()) {
        auto spec = spec_at_top_center(kind, 0.14, kind == AnomalyKind::kBend ? 0.25 : 0.05);
        spec.seed = 7;
        const auto out = inject_anomaly(parts, spec);
        REQUIRE_NOTHROW(validate_mesh(out[0]));
        REQUIRE(is_watertight(out[0]));
    }
}

TEST_CASE("missing removes material: a pit forms under the center") {
    const auto parts = plate_parts();
    const auto spec = spec_at_top_center(AnomalyKind::kMissing, 0.1, 0.05);
    const auto out = inject_anomaly(parts, spec);
    REQUIRE(is_watertight(out[0]));
    // The deformed surface near the center sits strictly below the plate top.
    MeshBvh bvh(out[0]);
    const Vec3 closest = bvh.closest(spec.center).point;
    REQUIRE(closest.z() < 0.06 - 1e-6);
    REQUIRE((closest - spec.center).norm() > 0.01);
}

TEST_CASE("fracture displaces only one side of the plane") {
    const auto parts = plate_parts();
    auto spec = spec_at_top_center(AnomalyKind::kFracture, 0.15, 0.06);
    spec.seed = 5;
    const auto out = inject_anomaly(parts, spec);
    std::size_t moved = 0, inside = 0;
    for (std::size_t v = 0; v < parts[0].vertices.size(); ++v) {
        const bool in_ball = (parts[0].vertices[v] - spec.center).norm() < spec.radius;
        if (in_ball) inside++;
        if (out[0].vertices[v] != parts[0].vertices[v]) {
            REQUIRE(in_ball);
            moved++;
        }
    }
    REQUIRE(moved > 0);
    REQUIRE(moved < inside);  // the other side of the plane stays put
}

TEST_CASE("deformation commutes with articulation") {
    const ArticulatedModel model = make_builtin_hinge();
    AnomalySpec spec;
    spec.kind = AnomalyKind::kDent;
    spec.target_part = 1;
    spec.center = Vec3(0.5, 0.0, 0.14);  // on the moving plate's top face
    spec.radius = 0.14;
    spec.magnitude = 0.05;
    spec.seed = 11;

    const double psi = 73.0;
    const auto tf = transform_for(model.joint, psi);
    const auto deformed_posed = inject_anomaly(pose_model(model, psi), spec, tf);
    const auto deformed_rest = inject_anomaly(pose_model(model, 0.0), spec, RigidTransform{});

    REQUIRE(deformed_posed[1].vertices.size() == deformed_rest[1].vertices.size());
    for (std::size_t v = 0; v < deformed_rest[1].vertices.size(); ++v) {
        const Vec3 expected = tf.apply(deformed_rest[1].vertices[v]);
        REQUIRE((deformed_posed[1].vertices[v] - expected).norm() < 1e-9);
    }
}

TEST_CASE("oversized dent through a thin plate is rejected as retryable") {
    const auto parts = plate_parts();
    const auto spec = spec_at_top_center(AnomalyKind::kDent, 0.2, 0.5);
    REQUIRE_THROWS_AS(inject_anomaly(parts, spec), RetryableError);
}

TEST_CASE("spec validation: center too far from the surface") {
    const auto parts = plate_parts();
    auto spec = spec_at_top_center(AnomalyKind::kDent, 0.1, 0.05);
    spec.center = Vec3(0, 0, 5.0);
    REQUIRE_THROWS_AS(inject_anomaly(parts, spec), InvalidInputError);
    auto bad_radius = spec_at_top_center(AnomalyKind::kDent, -1.0, 0.05);
    REQUIRE_THROWS_AS(inject_anomaly(parts, bad_radius), InvalidInputError);
    auto bad_part = spec_at_top_center(AnomalyKind::kDent, 0.1, 0.05);
    bad_part.target_part = 9;
    REQUIRE_THROWS_AS(inject_anomaly(parts, bad_part), InvalidInputError);
}
