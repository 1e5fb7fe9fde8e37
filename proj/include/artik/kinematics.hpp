#pragma once

#include <Eigen/Geometry>
#include <set>
#include <string>
#include <vector>

#include "artik/mesh.hpp"

namespace artik {

enum class JointKind { kRevolute, kPrismatic };

inline std::string to_string(JointKind k) { return k == JointKind::kRevolute ? "revolute" : "prismatic"; }

inline JointKind joint_kind_from_string(const std::string& s) {
    if (s == "revolute") return JointKind::kRevolute;
    if (s == "prismatic") return JointKind::kPrismatic;
    throw ConfigError("unknown joint kind '" + s + "' (expected revolute or prismatic)");
}

// Single-DoF joint. Revolute ranges are in degrees (converted to radians only
// inside transform_for); prismatic ranges are in the source mesh's model
// units, as given.
struct JointSpec {
    std::string name = "joint";
    JointKind kind = JointKind::kRevolute;
    Vec3 axis{0, 0, 1};
    Vec3 origin{0, 0, 0};  // revolute only
    double psi_min = 0.0;
    double psi_max = 1.0;
    std::set<int> moving_part_ids;
};

inline void validate_joint(const JointSpec& spec, int part_count) {
    if (std::abs(spec.axis.norm() - 1.0) > 1e-9)
        throw ConfigError("joint '" + spec.name + "': axis must be a unit vector");
    if (!(spec.psi_min < spec.psi_max))
        throw ConfigError("joint '" + spec.name + "': psi_min must be < psi_max");
    if (spec.moving_part_ids.empty())
        throw ConfigError("joint '" + spec.name + "': moving_part_ids must be nonempty");
    if (static_cast<int>(spec.moving_part_ids.size()) >= part_count)
        throw ConfigError("joint '" + spec.name + "': moving parts must be a strict subset of parts");
    for (int id : spec.moving_part_ids)
        if (id < 0 || id >= part_count)
            throw ConfigError("joint '" + spec.name + "': moving part id " + std::to_string(id) +
                              " out of range");
}

struct RigidTransform {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
    Vec3 rotate(const Vec3& v) const { return rotation * v; }

    RigidTransform compose_after(const RigidTransform& first) const {
        // this ∘ first
        RigidTransform out;
        out.rotation = rotation * first.rotation;
        out.translation = rotation * first.translation + translation;
        return out;
    }

    RigidTransform inverse() const {
        RigidTransform out;
        out.rotation = rotation.transpose();
        out.translation = -(rotation.transpose() * translation);
        return out;
    }
};

inline void validate_transform(const RigidTransform& t) {
    if (((t.rotation.transpose() * t.rotation) - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-9)
        throw ContractError("rigid transform: rotation is not orthonormal");
    if (std::abs(t.rotation.determinant() - 1.0) > 1e-9)
        throw ContractError("rigid transform: rotation has determinant != +1");
}

inline constexpr double kDegToRad = 3.14159265358979323846 / 180.0;
inline double deg_to_rad(double deg) { return deg * kDegToRad; }

// Rigid motion of the moving parts at joint state psi. Revolute: rotation by
// psi degrees about (axis, origin). Prismatic: translation by psi * axis.
inline RigidTransform transform_for(const JointSpec& spec, double psi) {
    if (psi < spec.psi_min || psi > spec.psi_max)
        throw RangeError("joint '" + spec.name + "': psi " + std::to_string(psi) + " outside range [" +
                         std::to_string(spec.psi_min) + ", " + std::to_string(spec.psi_max) + "]");
    RigidTransform out;
    if (spec.kind == JointKind::kRevolute) {
        out.rotation = Eigen::AngleAxisd(deg_to_rad(psi), spec.axis).toRotationMatrix();
        out.translation = spec.origin - out.rotation * spec.origin;
    } else {
        out.translation = psi * spec.axis;
    }
    return out;
}

// Articulated object: part meshes plus one joint.
struct ArticulatedModel {
    std::string name;
    std::vector<TriangleMesh> parts;
    JointSpec joint;

    bool is_moving(int part) const { return joint.moving_part_ids.count(part) > 0; }
};

inline void validate_model(const ArticulatedModel& model) {
    if (model.parts.size() < 2) throw ConfigError("model '" + model.name + "': needs at least two parts");
    validate_joint(model.joint, static_cast<int>(model.parts.size()));
    for (const auto& part : model.parts) validate_mesh(part);
}

// Pose-conditioned part meshes: moving parts transformed, static parts
// copied unchanged. Part order and per-part topology are preserved.
inline std::vector<TriangleMesh> pose_model(const ArticulatedModel& model, double psi) {
    const RigidTransform tf = transform_for(model.joint, psi);
    std::vector<TriangleMesh> out;
    out.reserve(model.parts.size());
    for (std::size_t i = 0; i < model.parts.size(); ++i) {
        TriangleMesh part = model.parts[i];
        if (model.is_moving(static_cast<int>(i)))
            for (auto& v : part.vertices) v = tf.apply(v);
        out.push_back(std::move(part));
    }
    return out;
}

}  // namespace artik
