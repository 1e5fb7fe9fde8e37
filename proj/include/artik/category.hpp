#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "artik/kinematics.hpp"
#include "artik/mesh_io.hpp"

#include "json.hpp"

namespace artik {

// ---------------------------------------------------------------------------
// Grid-subdivided axis-aligned box, welded into a single watertight surface.
// Subdivision gives anomaly deformations enough vertices to act on.
// ---------------------------------------------------------------------------

inline TriangleMesh make_box(const Vec3& lo, const Vec3& hi, double target_edge) {
    if (!((hi - lo).array() > 0.0).all()) throw InvalidInputError("make_box: hi must exceed lo");
    int div[3];
    for (int a = 0; a < 3; ++a)
        div[a] = std::max(1, static_cast<int>(std::lround((hi[a] - lo[a]) / target_edge)));

    TriangleMesh mesh;
    std::map<std::array<int, 3>, std::int32_t> lattice;
    auto vertex_at = [&](int i, int j, int k) {
        const std::array<int, 3> key{i, j, k};
        auto it = lattice.find(key);
        if (it != lattice.end()) return it->second;
        Vec3 p(lo.x() + (hi.x() - lo.x()) * i / div[0], lo.y() + (hi.y() - lo.y()) * j / div[1],
               lo.z() + (hi.z() - lo.z()) * k / div[2]);
        const auto idx = static_cast<std::int32_t>(mesh.vertices.size());
        mesh.vertices.push_back(p);
        lattice.emplace(key, idx);
        return idx;
    };

    // One face per axis and side; (u, v) = (a+1, a+2) keeps windings outward.
    for (int a = 0; a < 3; ++a) {
        const int u = (a + 1) % 3, v = (a + 2) % 3;
        for (int side = 0; side < 2; ++side) {
            const int ka = side == 0 ? 0 : div[a];
            for (int i = 0; i < div[u]; ++i) {
                for (int j = 0; j < div[v]; ++j) {
                    std::array<int, 3> c00{}, c10{}, c11{}, c01{};
                    auto set = [&](std::array<int, 3>& c, int iu, int jv) {
                        c[a] = ka;
                        c[u] = iu;
                        c[v] = jv;
                    };
                    set(c00, i, j);
                    set(c10, i + 1, j);
                    set(c11, i + 1, j + 1);
                    set(c01, i, j + 1);
                    const auto p00 = vertex_at(c00[0], c00[1], c00[2]);
                    const auto p10 = vertex_at(c10[0], c10[1], c10[2]);
                    const auto p11 = vertex_at(c11[0], c11[1], c11[2]);
                    const auto p01 = vertex_at(c01[0], c01[1], c01[2]);
                    if (side == 1) {
                        mesh.faces.push_back({p00, p10, p11});
                        mesh.faces.push_back({p00, p11, p01});
                    } else {
                        mesh.faces.push_back({p00, p11, p10});
                        mesh.faces.push_back({p00, p01, p11});
                    }
                }
            }
        }
    }
    return mesh;
}

// ---------------------------------------------------------------------------
// Built-in categories. All three are constructed so parts can never
// interpenetrate anywhere in the joint range: the hinge stacks its plates
// along the rotation axis, the laptop screen clears the base at all angles,
// and the drawer keeps clearance to every shell wall.
// ---------------------------------------------------------------------------

inline ArticulatedModel make_builtin_hinge(double target_edge = 0.045) {
    ArticulatedModel model;
    model.name = "hinge";
    model.parts.push_back(make_box(Vec3(-0.9, -0.3, -0.14), Vec3(0.25, 0.3, -0.02), target_edge));
    model.parts.push_back(make_box(Vec3(-0.25, -0.3, 0.02), Vec3(0.9, 0.3, 0.14), target_edge));
    model.joint.name = "hinge";
    model.joint.kind = JointKind::kRevolute;
    model.joint.axis = Vec3(0, 0, 1);
    model.joint.origin = Vec3(0, 0, 0);
    model.joint.psi_min = 0.0;
    model.joint.psi_max = 120.0;
    model.joint.moving_part_ids = {1};
    return model;
}

inline ArticulatedModel make_builtin_laptop(double target_edge = 0.045) {
    ArticulatedModel model;
    model.name = "laptop";
    model.parts.push_back(make_box(Vec3(0.0, 0.0, 0.0), Vec3(1.0, 0.7, 0.1), target_edge));
    model.parts.push_back(make_box(Vec3(0.02, 0.0, 0.18), Vec3(1.0, 0.7, 0.28), target_edge));
    model.joint.name = "laptop_hinge";
    model.joint.kind = JointKind::kRevolute;
    model.joint.axis = Vec3(0, -1, 0);
    model.joint.origin = Vec3(0.02, 0.0, 0.23);
    model.joint.psi_min = 0.0;
    model.joint.psi_max = 120.0;
    model.joint.moving_part_ids = {1};
    return model;
}

inline ArticulatedModel make_builtin_drawer(double target_edge = 0.045) {
    ArticulatedModel model;
    model.name = "drawer";
    // Shell: five separated wall slabs forming an open-front enclosure. Each
    // slab is closed, so the merged part stays watertight.
    TriangleMesh shell;
    shell = merge_meshes({
        make_box(Vec3(0.0, 0.0, 0.0), Vec3(1.1, 0.8, 0.06), target_edge),      // bottom
        make_box(Vec3(0.0, 0.0, 0.66), Vec3(1.1, 0.8, 0.72), target_edge),     // top
        make_box(Vec3(0.0, 0.0, 0.075), Vec3(1.1, 0.06, 0.645), target_edge),  // left
        make_box(Vec3(0.0, 0.74, 0.075), Vec3(1.1, 0.8, 0.645), target_edge),  // right
        make_box(Vec3(0.0, 0.075, 0.075), Vec3(0.06, 0.725, 0.645), target_edge),  // back
    });
    model.parts.push_back(std::move(shell));
    model.parts.push_back(make_box(Vec3(0.1, 0.12, 0.12), Vec3(1.05, 0.68, 0.585), target_edge));
    model.joint.name = "slide";
    model.joint.kind = JointKind::kPrismatic;
    model.joint.axis = Vec3(1, 0, 0);
    model.joint.psi_min = 0.0;
    model.joint.psi_max = 0.6;
    model.joint.moving_part_ids = {1};
    return model;
}

inline bool is_builtin_category(const std::string& name) {
    std::string n = name.rfind("builtin:", 0) == 0 ? name.substr(8) : name;
    return n == "hinge" || n == "drawer" || n == "laptop";
}

inline ArticulatedModel make_builtin_category(const std::string& name) {
    std::string n = name.rfind("builtin:", 0) == 0 ? name.substr(8) : name;
    if (n == "hinge") return make_builtin_hinge();
    if (n == "drawer") return make_builtin_drawer();
    if (n == "laptop") return make_builtin_laptop();
    throw ConfigError("unknown builtin category '" + name + "'");
}

// ---------------------------------------------------------------------------
// Category config file: {name, parts: [mesh paths], joint: {kind, axis,
// origin, range_min, range_max, moving_part_ids}}. Mesh paths are relative
// to the config file.
// ---------------------------------------------------------------------------

inline ArticulatedModel load_category_config(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open category config: " + path.string());
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("category config " + path.string() + ": " + e.what());
    }
    ArticulatedModel model;
    try {
        model.name = j.at("name").get<std::string>();
        for (const auto& rel : j.at("parts")) {
            const auto mesh_path = path.parent_path() / rel.get<std::string>();
            TriangleMesh mesh = read_mesh(mesh_path);
            mesh = remove_unreferenced_vertices(mesh);
            model.parts.push_back(std::move(mesh));
        }
        const auto& joint = j.at("joint");
        model.joint.name = model.name;
        model.joint.kind = joint_kind_from_string(joint.at("kind").get<std::string>());
        const auto& axis = joint.at("axis");
        model.joint.axis = Vec3(axis.at(0).get<double>(), axis.at(1).get<double>(), axis.at(2).get<double>());
        if (joint.contains("origin")) {
            const auto& origin = joint.at("origin");
            model.joint.origin =
                Vec3(origin.at(0).get<double>(), origin.at(1).get<double>(), origin.at(2).get<double>());
        }
        model.joint.psi_min = joint.at("range_min").get<double>();
        model.joint.psi_max = joint.at("range_max").get<double>();
        for (const auto& id : joint.at("moving_part_ids")) model.joint.moving_part_ids.insert(id.get<int>());
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("category config " + path.string() + ": " + e.what());
    }
    validate_model(model);
    return model;
}

// Resolves either a builtin name ("hinge", "builtin:hinge") or a config path.
inline ArticulatedModel resolve_category(const std::string& name_or_path) {
    if (is_builtin_category(name_or_path)) {
        ArticulatedModel model = make_builtin_category(name_or_path);
        validate_model(model);
        return model;
    }
    if (name_or_path.rfind("builtin:", 0) == 0)
        throw ConfigError("unknown builtin category '" + name_or_path + "'");
    return load_category_config(name_or_path);
}

}  // namespace artik
