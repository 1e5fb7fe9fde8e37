#pragma once

#include <map>
#include <string>
#include <vector>

#include "artik/kinematics.hpp"
#include "artik/mesh_query.hpp"
#include "artik/rng.hpp"

namespace artik {

enum class AnomalyKind : std::uint8_t { kDent, kBulge, kFracture, kBend, kDistortion, kMissing };

inline const std::vector<AnomalyKind>& all_anomaly_kinds() {
    static const std::vector<AnomalyKind> kinds = {AnomalyKind::kDent,    AnomalyKind::kBulge,
                                                   AnomalyKind::kFracture, AnomalyKind::kBend,
                                                   AnomalyKind::kDistortion, AnomalyKind::kMissing};
    return kinds;
}

inline std::string to_string(AnomalyKind k) {
    switch (k) {
        case AnomalyKind::kDent: return "dent";
        case AnomalyKind::kBulge: return "bulge";
        case AnomalyKind::kFracture: return "fracture";
        case AnomalyKind::kBend: return "bend";
        case AnomalyKind::kDistortion: return "distortion";
        case AnomalyKind::kMissing: return "missing";
    }
    return "unknown";
}

inline AnomalyKind anomaly_kind_from_string(const std::string& s) {
    for (AnomalyKind k : all_anomaly_kinds())
        if (to_string(k) == s) return k;
    throw ConfigError("unknown anomaly kind '" + s + "'");
}

// Deterministic procedural defect. Geometry (center, derived directions) is
// expressed in the target part's rest frame, so the same spec applied at two
// joint states produces rigidly corresponding deformations.
struct AnomalySpec {
    AnomalyKind kind = AnomalyKind::kDent;
    Vec3 center{0, 0, 0};   // rest frame, on (or near) the target part surface
    double radius = 0.1;
    double magnitude = 0.05;
    int target_part = 0;
    std::uint64_t seed = 0;
};

inline void validate_spec(const AnomalySpec& spec, int part_count) {
    if (!(spec.radius > 0.0)) throw InvalidInputError("anomaly spec: radius must be > 0");
    if (spec.magnitude < 0.0) throw InvalidInputError("anomaly spec: magnitude must be >= 0");
    if (spec.target_part < 0 || spec.target_part >= part_count)
        throw InvalidInputError("anomaly spec: target part " + std::to_string(spec.target_part) +
                                " out of range");
}

namespace anomaly_detail {

// cos^2 falloff: 1 at the center, smoothly 0 at the support radius.
inline double falloff(double r, double radius) {
    if (r >= radius) return 0.0;
    const double c = std::cos(0.5 * kPi * r / radius);
    return c * c;
}

inline std::vector<Vec3> vertex_normals(const TriangleMesh& mesh) {
    std::vector<Vec3> normals(mesh.vertices.size(), Vec3::Zero());
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        const Vec3 a = mesh.face_vertex(f, 0);
        const Vec3 n = (mesh.face_vertex(f, 1) - a).cross(mesh.face_vertex(f, 2) - a);  // area-weighted
        for (int c = 0; c < 3; ++c) normals[mesh.faces[f][c]] += n;
    }
    for (auto& n : normals) {
        const double len = n.norm();
        if (len > 0) n /= len;
    }
    return normals;
}

inline Vec3 random_unit(Rng& rng) {
    Vec3 v;
    do {
        v = Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    } while (v.squaredNorm() > 1.0 || v.squaredNorm() < 1e-6);
    return v.normalized();
}

// Removes faces fully inside the ball and caps each boundary loop with a fan
// to an inward-displaced apex, restoring a closed surface with a conical bite.
inline TriangleMesh carve_missing(const TriangleMesh& mesh, const Vec3& center, double radius,
                                  double depth) {
    std::vector<bool> inside(mesh.vertices.size());
    for (std::size_t v = 0; v < mesh.vertices.size(); ++v)
        inside[v] = (mesh.vertices[v] - center).norm() < radius;

    TriangleMesh out;
    out.vertices = mesh.vertices;
    Vec3 removed_normal = Vec3::Zero();
    std::vector<std::array<std::int32_t, 3>> removed;
    for (const auto& f : mesh.faces) {
        if (inside[f[0]] && inside[f[1]] && inside[f[2]]) {
            removed.push_back(f);
            const Vec3 a = mesh.vertices[f[0]];
            removed_normal += (mesh.vertices[f[1]] - a).cross(mesh.vertices[f[2]] - a);
        } else {
            out.faces.push_back(f);
        }
    }
    if (removed.empty()) return out;
    const double rn = removed_normal.norm();
    if (rn > 0) removed_normal /= rn;

    // Boundary = directed edges of remaining faces whose reverse sat in a
    // removed face. Each boundary vertex must have exactly one outgoing edge.
    std::map<std::int32_t, std::int32_t> next;
    {
        std::map<std::pair<std::int32_t, std::int32_t>, int> removed_edges;
        for (const auto& f : removed)
            for (int c = 0; c < 3; ++c) removed_edges[{f[c], f[(c + 1) % 3]}]++;
        for (const auto& f : out.faces) {
            for (int c = 0; c < 3; ++c) {
                const std::int32_t a = f[c], b = f[(c + 1) % 3];
                if (removed_edges.count({b, a})) {
                    if (next.count(a))
                        throw RetryableError("missing-material carve hit a non-manifold boundary");
                    next[a] = b;
                }
            }
        }
    }

    while (!next.empty()) {
        const std::int32_t start = next.begin()->first;
        std::vector<std::int32_t> loop;
        std::int32_t cur = start;
        do {
            loop.push_back(cur);
            auto it = next.find(cur);
            if (it == next.end()) throw RetryableError("missing-material carve produced an open boundary");
            cur = it->second;
            next.erase(it);
        } while (cur != start);
        if (loop.size() < 3) throw RetryableError("missing-material carve produced a degenerate loop");

        Vec3 centroid = Vec3::Zero();
        for (auto v : loop) centroid += out.vertices[static_cast<std::size_t>(v)];
        centroid /= static_cast<double>(loop.size());
        const auto apex = static_cast<std::int32_t>(out.vertices.size());
        out.vertices.push_back(centroid - removed_normal * depth);
        for (std::size_t i = 0; i < loop.size(); ++i) {
            const std::int32_t a = loop[i], b = loop[(i + 1) % loop.size()];
            out.faces.push_back({b, a, apex});
        }
    }
    return remove_unreferenced_vertices(out);
}

// Local self-intersection test: every face touching a displaced or new
// vertex is checked against all nearby non-adjacent faces.
inline bool deformation_self_intersects(const TriangleMesh& mesh, const std::vector<bool>& vertex_moved) {
    std::vector<std::size_t> suspects;
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        const auto& tri = mesh.faces[f];
        if (vertex_moved[tri[0]] || vertex_moved[tri[1]] || vertex_moved[tri[2]]) suspects.push_back(f);
    }
    if (suspects.empty()) return false;
    MeshBvh bvh(mesh);
    for (std::size_t f : suspects) {
        Aabb box;
        for (int c = 0; c < 3; ++c) box.expand(mesh.face_vertex(f, c));
        bool hit = false;
        bvh.for_overlapping(box, [&](std::int32_t g) {
            if (hit || static_cast<std::size_t>(g) == f) return;
            const auto& ta = mesh.faces[f];
            const auto& tb = mesh.faces[static_cast<std::size_t>(g)];
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j)
                    if (ta[i] == tb[j]) return;  // adjacent faces may touch
            if (triangles_intersect(mesh.face_vertex(f, 0), mesh.face_vertex(f, 1), mesh.face_vertex(f, 2),
                                    mesh.face_vertex(static_cast<std::size_t>(g), 0),
                                    mesh.face_vertex(static_cast<std::size_t>(g), 1),
                                    mesh.face_vertex(static_cast<std::size_t>(g), 2)))
                hit = true;
        });
        if (hit) return true;
    }
    return false;
}

}  // namespace anomaly_detail

// Applies the spec's deformation to the posed parts. `target_tf` is the
// rigid transform that posed the target part (identity for static parts);
// spec geometry lives in the rest frame and is carried through it, so the
// deformation commutes with articulation.
inline std::vector<TriangleMesh> inject_anomaly(const std::vector<TriangleMesh>& posed_parts,
                                                const AnomalySpec& spec,
                                                const RigidTransform& target_tf = RigidTransform{}) {
    validate_spec(spec, static_cast<int>(posed_parts.size()));
    if (spec.magnitude == 0.0) return posed_parts;

    const TriangleMesh& posed = posed_parts[static_cast<std::size_t>(spec.target_part)];
    const RigidTransform inv = target_tf.inverse();

    // Rest-frame copy of the target part.
    TriangleMesh rest = posed;
    for (auto& v : rest.vertices) v = inv.apply(v);

    {
        MeshBvh bvh(rest);
        if (bvh.unsigned_distance(spec.center) > 2.0 * spec.radius)
            throw InvalidInputError("anomaly spec: center farther than 2*radius from the target surface");
    }

    Rng rng(spec.seed);
    const auto normals = anomaly_detail::vertex_normals(rest);
    std::vector<bool> moved(rest.vertices.size(), false);

    auto displace = [&](auto&& field) {
        for (std::size_t v = 0; v < rest.vertices.size(); ++v) {
            const double r = (rest.vertices[v] - spec.center).norm();
            if (r >= spec.radius) continue;
            const Vec3 d = field(v, anomaly_detail::falloff(r, spec.radius));
            if (d.squaredNorm() > 0) {
                rest.vertices[v] += d;
                moved[v] = true;
            }
        }
    };

    switch (spec.kind) {
        case AnomalyKind::kDent:
            displace([&](std::size_t v, double w) { return Vec3(-spec.magnitude * w * normals[v]); });
            break;
        case AnomalyKind::kBulge:
            displace([&](std::size_t v, double w) { return Vec3(spec.magnitude * w * normals[v]); });
            break;
        case AnomalyKind::kFracture: {
            const Vec3 plane_n = anomaly_detail::random_unit(rng);
            const Vec3 dir = anomaly_detail::random_unit(rng);
            displace([&](std::size_t v, double w) {
                if ((rest.vertices[v] - spec.center).dot(plane_n) <= 0.0) return Vec3(Vec3::Zero());
                return Vec3(spec.magnitude * w * dir);
            });
            break;
        }
        case AnomalyKind::kBend: {
            const Vec3 axis = anomaly_detail::random_unit(rng);
            for (std::size_t v = 0; v < rest.vertices.size(); ++v) {
                const Vec3 rel = rest.vertices[v] - spec.center;
                const double r = rel.norm();
                if (r >= spec.radius) continue;
                const double angle = spec.magnitude * anomaly_detail::falloff(r, spec.radius);
                rest.vertices[v] = spec.center + Eigen::AngleAxisd(angle, axis).toRotationMatrix() * rel;
                moved[v] = true;
            }
            break;
        }
        case AnomalyKind::kDistortion: {
            // Smooth band-limited noise: three seeded sinusoids of position.
            std::array<Vec3, 3> waves;
            std::array<double, 3> phases;
            for (int i = 0; i < 3; ++i) {
                waves[i] = anomaly_detail::random_unit(rng) *
                           (2.0 * kPi / spec.radius * rng.uniform(0.7, 1.6));
                phases[i] = rng.uniform(0.0, 2.0 * kPi);
            }
            displace([&](std::size_t v, double w) {
                const Vec3 rel = rest.vertices[v] - spec.center;
                double noise = 0.0;
                for (int i = 0; i < 3; ++i) noise += std::sin(waves[i].dot(rel) + phases[i]);
                return Vec3(spec.magnitude * w * (noise / 3.0) * normals[v]);
            });
            break;
        }
        case AnomalyKind::kMissing: {
            const double depth = std::min(spec.magnitude, 0.6 * spec.radius);
            rest = anomaly_detail::carve_missing(rest, spec.center, spec.radius, depth);
            moved.assign(rest.vertices.size(), false);
            for (std::size_t v = 0; v < rest.vertices.size(); ++v)
                if ((rest.vertices[v] - spec.center).norm() < spec.radius) moved[v] = true;
            break;
        }
    }

    try {
        validate_mesh(rest);
    } catch (const InvalidInputError& e) {
        throw RetryableError(std::string("anomaly produced degenerate geometry: ") + e.what());
    }
    if (!is_watertight(rest)) throw RetryableError("anomaly broke watertightness");
    if (anomaly_detail::deformation_self_intersects(rest, moved))
        throw RetryableError("anomaly produced a self-intersection");

    std::vector<TriangleMesh> out = posed_parts;
    TriangleMesh& deformed = out[static_cast<std::size_t>(spec.target_part)];
    deformed = std::move(rest);
    for (auto& v : deformed.vertices) v = target_tf.apply(v);
    return out;
}

}  // namespace artik
