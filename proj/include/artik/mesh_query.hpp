#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <vector>

#include "artik/mesh.hpp"

namespace artik {

// Closest point on triangle (a,b,c) to p, via the standard barycentric
// region decomposition (Ericson, Real-Time Collision Detection, 5.1.5).
inline Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
    const Vec3 ab = b - a, ac = c - a, ap = p - a;
    const double d1 = ab.dot(ap), d2 = ac.dot(ap);
    if (d1 <= 0.0 && d2 <= 0.0) return a;

    const Vec3 bp = p - b;
    const double d3 = ab.dot(bp), d4 = ac.dot(bp);
    if (d3 >= 0.0 && d4 <= d3) return b;

    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) return a + (d1 / (d1 - d3)) * ab;

    const Vec3 cp = p - c;
    const double d5 = ab.dot(cp), d6 = ac.dot(cp);
    if (d6 >= 0.0 && d5 <= d6) return c;

    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) return a + (d2 / (d2 - d6)) * ac;

    const double va = d3 * d6 - d5 * d4;
    if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
        const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + w * (c - b);
    }

    const double denom = 1.0 / (va + vb + vc);
    const double v = vb * denom, w = vc * denom;
    return a + ab * v + ac * w;
}

struct ClosestHit {
    double sq_dist = std::numeric_limits<double>::infinity();
    Vec3 point{0, 0, 0};
    std::int32_t face = -1;
};

// Axis-aligned BVH over triangles: median split on the widest centroid axis,
// leaf size 8. Immutable after construction; queries are thread-safe.
class MeshBvh {
public:
    MeshBvh() = default;

    explicit MeshBvh(const TriangleMesh& mesh) : mesh_(&mesh) {
        const std::size_t n = mesh.faces.size();
        if (n == 0) throw InvalidInputError("cannot build BVH over an empty mesh");
        order_.resize(n);
        std::iota(order_.begin(), order_.end(), 0);
        centroids_.resize(n);
        boxes_.resize(n);
        for (std::size_t f = 0; f < n; ++f) {
            Aabb b;
            for (int c = 0; c < 3; ++c) b.expand(mesh.face_vertex(f, c));
            boxes_[f] = b;
            centroids_[f] = (mesh.face_vertex(f, 0) + mesh.face_vertex(f, 1) + mesh.face_vertex(f, 2)) / 3.0;
        }
        nodes_.reserve(2 * n / kLeafSize + 2);
        build(0, n);
        centroids_.clear();
        centroids_.shrink_to_fit();
    }

    const TriangleMesh& mesh() const { return *mesh_; }

    ClosestHit closest(const Vec3& p) const {
        ClosestHit best;
        closest_rec(0, p, best);
        return best;
    }

    double unsigned_distance(const Vec3& p) const { return std::sqrt(closest(p).sq_dist); }

    // Number of ray-surface crossings with t > 0 (Moller-Trumbore per leaf
    // triangle). Grazing hits can double count; callers vote over rays.
    int count_ray_crossings(const Vec3& origin, const Vec3& dir) const {
        int count = 0;
        ray_rec(0, origin, dir, count);
        return count;
    }

    // Visits faces whose bounding boxes overlap the query box.
    template <typename Fn>
    void for_overlapping(const Aabb& box, Fn&& fn) const {
        overlap_rec(0, box, fn);
    }

private:
    static constexpr int kLeafSize = 8;

    struct Node {
        Aabb box;
        std::int32_t left = -1;    // internal: child index; leaf: first face slot
        std::int32_t count = 0;    // leaf: number of faces; internal: 0
        std::int32_t right = -1;
    };

    std::int32_t build(std::size_t begin, std::size_t end) {
        Node node;
        for (std::size_t i = begin; i < end; ++i) node.box.expand(boxes_[order_[i]]);
        const auto idx = static_cast<std::int32_t>(nodes_.size());
        nodes_.push_back(node);
        if (end - begin <= kLeafSize) {
            nodes_[idx].left = static_cast<std::int32_t>(begin);
            nodes_[idx].count = static_cast<std::int32_t>(end - begin);
            return idx;
        }
        Aabb cbox;
        for (std::size_t i = begin; i < end; ++i) cbox.expand(centroids_[order_[i]]);
        int axis = 0;
        Vec3 extent = cbox.hi - cbox.lo;
        if (extent[1] > extent[axis]) axis = 1;
        if (extent[2] > extent[axis]) axis = 2;
        const std::size_t mid = (begin + end) / 2;
        std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                         [&](std::size_t a, std::size_t b) { return centroids_[a][axis] < centroids_[b][axis]; });
        const std::int32_t l = build(begin, mid);
        const std::int32_t r = build(mid, end);
        nodes_[idx].left = l;
        nodes_[idx].right = r;
        nodes_[idx].count = 0;
        return idx;
    }

    void closest_rec(std::int32_t ni, const Vec3& p, ClosestHit& best) const {
        const Node& node = nodes_[ni];
        if (node.box.sq_dist(p) >= best.sq_dist) return;
        if (node.count > 0) {
            for (std::int32_t i = 0; i < node.count; ++i) {
                const auto f = static_cast<std::int32_t>(order_[node.left + i]);
                const Vec3 q = closest_point_on_triangle(p, mesh_->face_vertex(f, 0), mesh_->face_vertex(f, 1),
                                                         mesh_->face_vertex(f, 2));
                const double d2 = (q - p).squaredNorm();
                if (d2 < best.sq_dist) {
                    best.sq_dist = d2;
                    best.point = q;
                    best.face = f;
                }
            }
            return;
        }
        const double dl = nodes_[node.left].box.sq_dist(p);
        const double dr = nodes_[node.right].box.sq_dist(p);
        if (dl < dr) {
            closest_rec(node.left, p, best);
            closest_rec(node.right, p, best);
        } else {
            closest_rec(node.right, p, best);
            closest_rec(node.left, p, best);
        }
    }

    static bool ray_hits_box(const Aabb& box, const Vec3& o, const Vec3& inv_dir) {
        double tmin = 0.0, tmax = std::numeric_limits<double>::infinity();
        for (int a = 0; a < 3; ++a) {
            double t1 = (box.lo[a] - o[a]) * inv_dir[a];
            double t2 = (box.hi[a] - o[a]) * inv_dir[a];
            if (t1 > t2) std::swap(t1, t2);
            tmin = std::max(tmin, t1);
            tmax = std::min(tmax, t2);
            if (tmin > tmax) return false;
        }
        return true;
    }

    void ray_rec(std::int32_t ni, const Vec3& o, const Vec3& dir, int& count) const {
        const Node& node = nodes_[ni];
        const Vec3 inv_dir = dir.cwiseInverse();
        if (!ray_hits_box(node.box, o, inv_dir)) return;
        if (node.count > 0) {
            for (std::int32_t i = 0; i < node.count; ++i) {
                const auto f = static_cast<std::int32_t>(order_[node.left + i]);
                if (ray_intersects_triangle(o, dir, mesh_->face_vertex(f, 0), mesh_->face_vertex(f, 1),
                                            mesh_->face_vertex(f, 2)))
                    count++;
            }
            return;
        }
        ray_rec(node.left, o, dir, count);
        ray_rec(node.right, o, dir, count);
    }

    static bool ray_intersects_triangle(const Vec3& o, const Vec3& dir, const Vec3& a, const Vec3& b,
                                        const Vec3& c) {
        const Vec3 e1 = b - a, e2 = c - a;
        const Vec3 pvec = dir.cross(e2);
        const double det = e1.dot(pvec);
        if (std::abs(det) < 1e-14) return false;
        const double inv_det = 1.0 / det;
        const Vec3 tvec = o - a;
        const double u = tvec.dot(pvec) * inv_det;
        if (u < 0.0 || u > 1.0) return false;
        const Vec3 qvec = tvec.cross(e1);
        const double v = dir.dot(qvec) * inv_det;
        if (v < 0.0 || u + v > 1.0) return false;
        const double t = e2.dot(qvec) * inv_det;
        return t > 0.0;
    }

    template <typename Fn>
    void overlap_rec(std::int32_t ni, const Aabb& box, Fn& fn) const {
        const Node& node = nodes_[ni];
        if (!node.box.overlaps(box)) return;
        if (node.count > 0) {
            for (std::int32_t i = 0; i < node.count; ++i) {
                const auto f = static_cast<std::int32_t>(order_[node.left + i]);
                if (boxes_[f].overlaps(box)) fn(f);
            }
            return;
        }
        overlap_rec(node.left, box, fn);
        overlap_rec(node.right, box, fn);
    }

    const TriangleMesh* mesh_ = nullptr;
    std::vector<Node> nodes_;
    std::vector<std::size_t> order_;
    std::vector<Vec3> centroids_;
    std::vector<Aabb> boxes_;
};

namespace detail {

// Five fixed pseudo-random unit directions for the parity vote. Drawn once
// from a fixed stream and frozen so signs are stable across runs.
inline const std::array<Vec3, 5>& parity_directions() {
    static const std::array<Vec3, 5> dirs = [] {
        std::array<Vec3, 5> d{};
        std::uint64_t s = 0x51ed2700f4a7c15ULL;
        for (auto& v : d) {
            // splitmix-style scramble; exact values are irrelevant, only that
            // they avoid axis alignment and stay fixed.
            auto draw = [&s] {
                std::uint64_t z = (s += 0x9e3779b97f4a7c15ULL);
                z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
                z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
                z ^= z >> 31;
                return 2.0 * (static_cast<double>(z >> 11) * 0x1.0p-53) - 1.0;
            };
            Vec3 u(draw(), draw(), draw());
            while (u.norm() < 1e-3) u = Vec3(draw(), draw(), draw());
            v = u.normalized();
        }
        return d;
    }();
    return dirs;
}

}  // namespace detail

// Signed distance with sign from a 5-ray parity vote: odd crossing count
// means inside. Requires a watertight mesh; unsigned_distance has no such
// requirement.
class SignedDistanceField {
public:
    explicit SignedDistanceField(const TriangleMesh& mesh, bool require_watertight = true)
        : bvh_(mesh), watertight_(is_watertight(mesh)) {
        if (require_watertight && !watertight_)
            throw SignUndefinedError(
                "signed distance requires a watertight mesh (use unsigned_distance otherwise)");
    }

    bool watertight() const { return watertight_; }
    const MeshBvh& bvh() const { return bvh_; }

    double unsigned_distance(const Vec3& p) const { return bvh_.unsigned_distance(p); }

    bool inside(const Vec3& p) const {
        if (!watertight_) throw SignUndefinedError("inside/outside is undefined for a non-watertight mesh");
        int odd_votes = 0;
        for (const Vec3& dir : detail::parity_directions()) {
            if (bvh_.count_ray_crossings(p, dir) % 2 == 1) odd_votes++;
        }
        return odd_votes >= 3;
    }

    double signed_distance(const Vec3& p) const {
        const double d = unsigned_distance(p);
        return inside(p) ? -d : d;
    }

private:
    MeshBvh bvh_;
    bool watertight_;
};

// Index of the part whose surface is nearest to the query; exact-distance
// ties resolve to the lowest index.
inline int nearest_part(const Vec3& query, const std::vector<MeshBvh>& part_bvhs) {
    if (part_bvhs.empty()) throw InvalidInputError("nearest_part requires at least one part");
    int best = 0;
    double best_d2 = part_bvhs[0].closest(query).sq_dist;
    for (std::size_t i = 1; i < part_bvhs.size(); ++i) {
        const double d2 = part_bvhs[i].closest(query).sq_dist;
        if (d2 < best_d2) {
            best_d2 = d2;
            best = static_cast<int>(i);
        }
    }
    return best;
}

// ---------------------------------------------------------------------------
// Triangle-triangle intersection (Moller 1997), used by the self-intersection
// and part-overlap validators.
// ---------------------------------------------------------------------------

namespace detail {

inline bool edge_against_tri_edges(const Vec3& v0, const Vec3& v1, const Vec3& u0, const Vec3& u1,
                                   const Vec3& u2, int i0, int i1) {
    auto edge_edge = [&](const Vec3& a0, const Vec3& b0) {
        // 2D segment intersection in the projection plane (i0, i1).
        const double ax = v1[i0] - v0[i0], ay = v1[i1] - v0[i1];
        const double bx = a0[i0] - b0[i0], by = a0[i1] - b0[i1];
        const double cx = v0[i0] - a0[i0], cy = v0[i1] - a0[i1];
        const double f = ay * bx - ax * by;
        const double d = by * cx - bx * cy;
        if ((f > 0 && d >= 0 && d <= f) || (f < 0 && d <= 0 && d >= f)) {
            const double e = ax * cy - ay * cx;
            if (f > 0) {
                if (e >= 0 && e <= f) return true;
            } else {
                if (e <= 0 && e >= f) return true;
            }
        }
        return false;
    };
    return edge_edge(u0, u1) || edge_edge(u1, u2) || edge_edge(u2, u0);
}

inline bool point_in_tri_2d(const Vec3& p, const Vec3& u0, const Vec3& u1, const Vec3& u2, int i0, int i1) {
    auto side = [&](const Vec3& a, const Vec3& b) {
        return (b[i0] - a[i0]) * (p[i1] - a[i1]) - (b[i1] - a[i1]) * (p[i0] - a[i0]);
    };
    const double d0 = side(u0, u1), d1 = side(u1, u2), d2 = side(u2, u0);
    const bool has_neg = (d0 < 0) || (d1 < 0) || (d2 < 0);
    const bool has_pos = (d0 > 0) || (d1 > 0) || (d2 > 0);
    return !(has_neg && has_pos);
}

inline bool coplanar_tri_tri(const Vec3& n, const Vec3& v0, const Vec3& v1, const Vec3& v2, const Vec3& u0,
                             const Vec3& u1, const Vec3& u2) {
    Vec3 an = n.cwiseAbs();
    int i0, i1;
    if (an[0] > an[1] && an[0] > an[2]) {
        i0 = 1;
        i1 = 2;
    } else if (an[1] > an[2]) {
        i0 = 0;
        i1 = 2;
    } else {
        i0 = 0;
        i1 = 1;
    }
    if (edge_against_tri_edges(v0, v1, u0, u1, u2, i0, i1)) return true;
    if (edge_against_tri_edges(v1, v2, u0, u1, u2, i0, i1)) return true;
    if (edge_against_tri_edges(v2, v0, u0, u1, u2, i0, i1)) return true;
    if (point_in_tri_2d(v0, u0, u1, u2, i0, i1)) return true;
    if (point_in_tri_2d(u0, v0, v1, v2, i0, i1)) return true;
    return false;
}

inline bool compute_intervals(double vv0, double vv1, double vv2, double d0, double d1, double d2,
                              double d0d1, double d0d2, double& isect0, double& isect1) {
    auto isect = [](double a, double b, double c, double da, double db, double dc, double& i0, double& i1) {
        i0 = a + (b - a) * da / (da - db);
        i1 = a + (c - a) * da / (da - dc);
    };
    if (d0d1 > 0.0) {
        isect(vv2, vv0, vv1, d2, d0, d1, isect0, isect1);
    } else if (d0d2 > 0.0) {
        isect(vv1, vv0, vv2, d1, d0, d2, isect0, isect1);
    } else if (d1 * d2 > 0.0 || d0 != 0.0) {
        isect(vv0, vv1, vv2, d0, d1, d2, isect0, isect1);
    } else if (d1 != 0.0) {
        isect(vv1, vv0, vv2, d1, d0, d2, isect0, isect1);
    } else if (d2 != 0.0) {
        isect(vv2, vv0, vv1, d2, d0, d1, isect0, isect1);
    } else {
        return true;  // coplanar
    }
    return false;
}

}  // namespace detail

// True if the two triangles intersect. `eps` shrinks plane-distance tests so
// merely touching configurations (shared edges after deformation) do not
// count as intersections.
inline bool triangles_intersect(const Vec3& v0, const Vec3& v1, const Vec3& v2, const Vec3& u0,
                                const Vec3& u1, const Vec3& u2, double eps = 1e-10) {
    const Vec3 n1 = (v1 - v0).cross(v2 - v0);
    const double d1 = -n1.dot(v0);
    double du0 = n1.dot(u0) + d1, du1 = n1.dot(u1) + d1, du2 = n1.dot(u2) + d1;
    if (std::abs(du0) < eps) du0 = 0.0;
    if (std::abs(du1) < eps) du1 = 0.0;
    if (std::abs(du2) < eps) du2 = 0.0;
    const double du0du1 = du0 * du1, du0du2 = du0 * du2;
    if (du0du1 > 0.0 && du0du2 > 0.0) return false;

    const Vec3 n2 = (u1 - u0).cross(u2 - u0);
    const double d2 = -n2.dot(u0);
    double dv0 = n2.dot(v0) + d2, dv1 = n2.dot(v1) + d2, dv2 = n2.dot(v2) + d2;
    if (std::abs(dv0) < eps) dv0 = 0.0;
    if (std::abs(dv1) < eps) dv1 = 0.0;
    if (std::abs(dv2) < eps) dv2 = 0.0;
    const double dv0dv1 = dv0 * dv1, dv0dv2 = dv0 * dv2;
    if (dv0dv1 > 0.0 && dv0dv2 > 0.0) return false;

    const Vec3 dd = n1.cross(n2);
    int axis = 0;
    Vec3 add = dd.cwiseAbs();
    if (add[1] > add[axis]) axis = 1;
    if (add[2] > add[axis]) axis = 2;

    const double vp0 = v0[axis], vp1 = v1[axis], vp2 = v2[axis];
    const double up0 = u0[axis], up1 = u1[axis], up2 = u2[axis];

    double isect1[2], isect2[2];
    if (detail::compute_intervals(vp0, vp1, vp2, dv0, dv1, dv2, dv0dv1, dv0dv2, isect1[0], isect1[1]))
        return detail::coplanar_tri_tri(n1, v0, v1, v2, u0, u1, u2);
    if (detail::compute_intervals(up0, up1, up2, du0, du1, du2, du0du1, du0du2, isect2[0], isect2[1]))
        return detail::coplanar_tri_tri(n1, v0, v1, v2, u0, u1, u2);

    if (isect1[0] > isect1[1]) std::swap(isect1[0], isect1[1]);
    if (isect2[0] > isect2[1]) std::swap(isect2[0], isect2[1]);
    return !(isect1[1] < isect2[0] || isect2[1] < isect1[0]);
}

// True if the interiors of two parts overlap: either their surfaces cross
// (any non-touching triangle pair intersects) or one part lies fully inside
// the other. Parts must be watertight for the containment half.
inline bool parts_interiors_intersect(const TriangleMesh& a, const TriangleMesh& b) {
    if (a.empty() || b.empty()) return false;
    if (!a.bounds().overlaps(b.bounds())) return false;
    MeshBvh bvh_b(b);
    for (std::size_t f = 0; f < a.faces.size(); ++f) {
        Aabb fb;
        for (int c = 0; c < 3; ++c) fb.expand(a.face_vertex(f, c));
        bool hit = false;
        bvh_b.for_overlapping(fb, [&](std::int32_t g) {
            if (hit) return;
            if (triangles_intersect(a.face_vertex(f, 0), a.face_vertex(f, 1), a.face_vertex(f, 2),
                                    b.face_vertex(g, 0), b.face_vertex(g, 1), b.face_vertex(g, 2)))
                hit = true;
        });
        if (hit) return true;
    }
    // No surface crossing: containment check via one representative vertex.
    if (is_watertight(b)) {
        SignedDistanceField sdf_b(b);
        if (sdf_b.inside(a.vertices.front())) return true;
    }
    if (is_watertight(a)) {
        SignedDistanceField sdf_a(a);
        if (sdf_a.inside(b.vertices.front())) return true;
    }
    return false;
}

}  // namespace artik
