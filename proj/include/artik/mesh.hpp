#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cstdint>
#include <limits>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "artik/common.hpp"

namespace artik {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

struct Aabb {
    Vec3 lo{Vec3::Constant(std::numeric_limits<double>::infinity())};
    Vec3 hi{Vec3::Constant(-std::numeric_limits<double>::infinity())};

    void expand(const Vec3& p) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    void expand(const Aabb& b) {
        lo = lo.cwiseMin(b.lo);
        hi = hi.cwiseMax(b.hi);
    }
    bool overlaps(const Aabb& b) const {
        return (lo.array() <= b.hi.array()).all() && (b.lo.array() <= hi.array()).all();
    }
    bool valid() const { return (lo.array() <= hi.array()).all(); }
    Vec3 center() const { return 0.5 * (lo + hi); }
    double diagonal() const { return valid() ? (hi - lo).norm() : 0.0; }

    // Squared distance from a point to the box (0 inside).
    double sq_dist(const Vec3& p) const {
        double d = 0.0;
        for (int a = 0; a < 3; ++a) {
            double v = p[a];
            if (v < lo[a]) d += (lo[a] - v) * (lo[a] - v);
            if (v > hi[a]) d += (v - hi[a]) * (v - hi[a]);
        }
        return d;
    }
};

// Indexed triangle mesh. Vertices are positions only; all per-point
// attributes in this project live on sampled point clouds, not meshes.
struct TriangleMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<std::int32_t, 3>> faces;

    bool empty() const { return faces.empty(); }

    Vec3 face_vertex(std::size_t f, int corner) const { return vertices[faces[f][corner]]; }

    double face_area(std::size_t f) const {
        const Vec3 a = face_vertex(f, 0);
        return 0.5 * (face_vertex(f, 1) - a).cross(face_vertex(f, 2) - a).norm();
    }

    Vec3 face_normal(std::size_t f) const {
        const Vec3 a = face_vertex(f, 0);
        Vec3 n = (face_vertex(f, 1) - a).cross(face_vertex(f, 2) - a);
        double len = n.norm();
        return len > 0 ? Vec3(n / len) : Vec3(0, 0, 0);
    }

    double total_area() const {
        double s = 0.0;
        for (std::size_t f = 0; f < faces.size(); ++f) s += face_area(f);
        return s;
    }

    Aabb bounds() const {
        Aabb b;
        for (const auto& v : vertices) b.expand(v);
        return b;
    }
};

// Structural validity: indices in range, no degenerate or repeated-vertex
// faces. Throws InvalidInputError describing the first offending face.
inline void validate_mesh(const TriangleMesh& mesh, double min_area = 1e-12) {
    const auto nv = static_cast<std::int32_t>(mesh.vertices.size());
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        const auto& tri = mesh.faces[f];
        for (int c = 0; c < 3; ++c) {
            if (tri[c] < 0 || tri[c] >= nv)
                throw InvalidInputError("mesh face " + std::to_string(f) + " references vertex " +
                                        std::to_string(tri[c]) + " outside [0, " + std::to_string(nv) + ")");
        }
        if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2])
            throw InvalidInputError("mesh face " + std::to_string(f) + " repeats a vertex");
        if (mesh.face_area(f) <= min_area)
            throw InvalidInputError("mesh face " + std::to_string(f) + " is degenerate (area <= " +
                                    std::to_string(min_area) + ")");
    }
}

// Watertight = every undirected edge is shared by exactly two faces with
// opposite direction (consistent orientation). Multiple closed components
// are allowed.
inline bool is_watertight(const TriangleMesh& mesh) {
    if (mesh.faces.empty()) return false;
    struct EdgeUse {
        int forward = 0;
        int backward = 0;
    };
    std::unordered_map<std::uint64_t, EdgeUse> edges;
    edges.reserve(mesh.faces.size() * 3);
    auto key = [](std::int32_t a, std::int32_t b) {
        std::uint64_t lo = static_cast<std::uint32_t>(std::min(a, b));
        std::uint64_t hi = static_cast<std::uint32_t>(std::max(a, b));
        return (hi << 32) | lo;
    };
    for (const auto& tri : mesh.faces) {
        for (int c = 0; c < 3; ++c) {
            std::int32_t a = tri[c], b = tri[(c + 1) % 3];
            auto& use = edges[key(a, b)];
            if (a < b)
                use.forward++;
            else
                use.backward++;
        }
    }
    for (const auto& [k, use] : edges) {
        (void)k;
        if (use.forward != 1 || use.backward != 1) return false;
    }
    return true;
}

inline TriangleMesh merge_meshes(const std::vector<TriangleMesh>& parts) {
    TriangleMesh out;
    std::size_t nv = 0, nf = 0;
    for (const auto& p : parts) {
        nv += p.vertices.size();
        nf += p.faces.size();
    }
    out.vertices.reserve(nv);
    out.faces.reserve(nf);
    for (const auto& p : parts) {
        const auto offset = static_cast<std::int32_t>(out.vertices.size());
        out.vertices.insert(out.vertices.end(), p.vertices.begin(), p.vertices.end());
        for (const auto& tri : p.faces)
            out.faces.push_back({tri[0] + offset, tri[1] + offset, tri[2] + offset});
    }
    return out;
}

// Drops vertices not referenced by any face and remaps indices.
inline TriangleMesh remove_unreferenced_vertices(const TriangleMesh& mesh) {
    std::vector<std::int32_t> remap(mesh.vertices.size(), -1);
    TriangleMesh out;
    out.faces.reserve(mesh.faces.size());
    for (const auto& tri : mesh.faces) {
        std::array<std::int32_t, 3> t{};
        for (int c = 0; c < 3; ++c) {
            if (remap[tri[c]] < 0) {
                remap[tri[c]] = static_cast<std::int32_t>(out.vertices.size());
                out.vertices.push_back(mesh.vertices[tri[c]]);
            }
            t[c] = remap[tri[c]];
        }
        out.faces.push_back(t);
    }
    return out;
}

}  // namespace artik
