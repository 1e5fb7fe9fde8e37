#pragma once

#include <cstdint>
#include <vector>

#include "artik/mesh.hpp"
#include "artik/rng.hpp"

namespace artik {

struct SurfaceSample {
    Vec3 point;
    std::int32_t face = -1;
    // Barycentric coordinates of the point in its face (w0 = 1 - w1 - w2).
    double w1 = 0.0, w2 = 0.0;
};

// Uniform area-weighted surface sampling: face chosen proportionally to area
// via a cumulative table, position by the sqrt barycentric trick. Output is a
// pure function of (mesh, n, seed).
inline std::vector<SurfaceSample> sample_surface(const TriangleMesh& mesh, std::size_t n,
                                                 std::uint64_t seed) {
    if (mesh.empty()) throw InvalidInputError("sample_surface: empty mesh");
    if (n == 0) throw InvalidInputError("sample_surface: n must be >= 1");

    std::vector<double> cumulative(mesh.faces.size());
    double total = 0.0;
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        total += mesh.face_area(f);
        cumulative[f] = total;
    }
    if (!(total > 0.0)) throw InvalidInputError("sample_surface: mesh has zero total area");

    Rng rng(seed);
    std::vector<SurfaceSample> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double u = rng.uniform() * total;
        auto it = std::lower_bound(cumulative.begin(), cumulative.end(), u);
        auto f = static_cast<std::int32_t>(it == cumulative.end() ? cumulative.size() - 1
                                                                  : it - cumulative.begin());
        const double r1 = std::sqrt(rng.uniform());
        const double r2 = rng.uniform();
        const double w0 = 1.0 - r1;
        const double w1 = r1 * (1.0 - r2);
        const double w2 = r1 * r2;
        SurfaceSample s;
        s.face = f;
        s.w1 = w1;
        s.w2 = w2;
        s.point = w0 * mesh.face_vertex(f, 0) + w1 * mesh.face_vertex(f, 1) + w2 * mesh.face_vertex(f, 2);
        out.push_back(s);
    }
    return out;
}

}  // namespace artik
