#pragma once

#include <vector>

#include "artik/mesh.hpp"

#include "json.hpp"

namespace artik {

// Category-level normalization: center c is the mean over all points of all
// training samples, scale s the maximum absolute coordinate after centering,
// so the fitting set maps into [-1, 1]^3 with at least one component hitting
// a bound exactly.
struct NormalizationParams {
    Vec3 center{0, 0, 0};
    double scale = 1.0;
};

inline NormalizationParams fit_normalization(const std::vector<std::vector<Vec3>>& point_sets) {
    std::size_t count = 0;
    Vec3 sum(0, 0, 0);
    for (const auto& set : point_sets) {
        for (const auto& p : set) sum += p;
        count += set.size();
    }
    if (count == 0) throw InvalidInputError("fit_normalization: no points given");
    NormalizationParams params;
    params.center = sum / static_cast<double>(count);
    double s = 0.0;
    for (const auto& set : point_sets)
        for (const auto& p : set) s = std::max(s, (p - params.center).cwiseAbs().maxCoeff());
    if (!(s > 0.0))
        throw DegenerateGeometryError("fit_normalization: all points coincide, scale would be zero");
    params.scale = s;
    return params;
}

inline Vec3 normalize_point(const Vec3& p, const NormalizationParams& params) {
    return (p - params.center) / params.scale;
}

inline Vec3 denormalize_point(const Vec3& p, const NormalizationParams& params) {
    return p * params.scale + params.center;
}

inline std::vector<Vec3> normalize_points(const std::vector<Vec3>& pts, const NormalizationParams& params) {
    std::vector<Vec3> out;
    out.reserve(pts.size());
    for (const auto& p : pts) out.push_back(normalize_point(p, params));
    return out;
}

inline std::vector<Vec3> denormalize_points(const std::vector<Vec3>& pts,
                                            const NormalizationParams& params) {
    std::vector<Vec3> out;
    out.reserve(pts.size());
    for (const auto& p : pts) out.push_back(denormalize_point(p, params));
    return out;
}

inline TriangleMesh normalize_mesh(const TriangleMesh& mesh, const NormalizationParams& params) {
    TriangleMesh out = mesh;
    for (auto& v : out.vertices) v = normalize_point(v, params);
    return out;
}

inline nlohmann::json normalization_to_json(const NormalizationParams& p) {
    return nlohmann::json{{"center", {p.center.x(), p.center.y(), p.center.z()}}, {"scale", p.scale}};
}

inline NormalizationParams normalization_from_json(const nlohmann::json& j) {
    NormalizationParams p;
    const auto& c = j.at("center");
    p.center = Vec3(c.at(0).get<double>(), c.at(1).get<double>(), c.at(2).get<double>());
    p.scale = j.at("scale").get<double>();
    if (!(p.scale > 0.0)) throw FormatError("normalization params: scale must be positive");
    return p;
}

}  // namespace artik
