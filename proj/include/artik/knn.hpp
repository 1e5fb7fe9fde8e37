#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <vector>

#include "artik/mesh.hpp"

namespace artik {

// kd-tree over a fixed point set, median split. Nearest-neighbor ties (exact
// equal squared distance) resolve to the lowest reference index, matching the
// linear-scan oracle.
class KdTree {
public:
    explicit KdTree(std::vector<Vec3> points) : points_(std::move(points)) {
        if (points_.empty()) throw InvalidInputError("KdTree: empty reference set");
        order_.resize(points_.size());
        std::iota(order_.begin(), order_.end(), 0);
        nodes_.reserve(points_.size() * 2 / kLeafSize + 2);
        build(0, points_.size());
    }

    std::size_t size() const { return points_.size(); }
    const std::vector<Vec3>& points() const { return points_; }

    // Index of the nearest reference point.
    std::int32_t nearest(const Vec3& q) const {
        Best best;
        nearest_rec(0, q, best);
        return best.index;
    }

private:
    static constexpr int kLeafSize = 16;

    struct Node {
        Aabb box;
        std::int32_t left = -1;
        std::int32_t right = -1;
        std::int32_t begin = 0;
        std::int32_t count = 0;  // > 0 for leaves
    };

    struct Best {
        double d2 = std::numeric_limits<double>::infinity();
        std::int32_t index = -1;
    };

    std::int32_t build(std::size_t begin, std::size_t end) {
        Node node;
        for (std::size_t i = begin; i < end; ++i) node.box.expand(points_[order_[i]]);
        const auto idx = static_cast<std::int32_t>(nodes_.size());
        nodes_.push_back(node);
        if (end - begin <= kLeafSize) {
            nodes_[idx].begin = static_cast<std::int32_t>(begin);
            nodes_[idx].count = static_cast<std::int32_t>(end - begin);
            return idx;
        }
        const Vec3 ext = node.box.hi - node.box.lo;
        int axis = 0;
        if (ext[1] > ext[axis]) axis = 1;
        if (ext[2] > ext[axis]) axis = 2;
        const std::size_t mid = (begin + end) / 2;
        std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                         [&](std::size_t a, std::size_t b) { return points_[a][axis] < points_[b][axis]; });
        const std::int32_t l = build(begin, mid);
        const std::int32_t r = build(mid, end);
        nodes_[idx].left = l;
        nodes_[idx].right = r;
        return idx;
    }

    void nearest_rec(std::int32_t ni, const Vec3& q, Best& best) const {
        const Node& node = nodes_[ni];
        if (node.box.sq_dist(q) > best.d2) return;
        if (node.count > 0) {
            for (std::int32_t i = 0; i < node.count; ++i) {
                const auto pi = static_cast<std::int32_t>(order_[node.begin + i]);
                const double d2 = (points_[pi] - q).squaredNorm();
                if (d2 < best.d2 || (d2 == best.d2 && pi < best.index)) {
                    best.d2 = d2;
                    best.index = pi;
                }
            }
            return;
        }
        const double dl = nodes_[node.left].box.sq_dist(q);
        const double dr = nodes_[node.right].box.sq_dist(q);
        if (dl <= dr) {
            nearest_rec(node.left, q, best);
            nearest_rec(node.right, q, best);
        } else {
            nearest_rec(node.right, q, best);
            nearest_rec(node.left, q, best);
        }
    }

    std::vector<Vec3> points_;
    std::vector<std::size_t> order_;
    std::vector<Node> nodes_;
};

// Label of the Euclidean-nearest reference point; ties by lowest reference
// index. Labels must be aligned with the reference points.
template <typename Label>
Label nearest_label(const Vec3& query, const KdTree& tree, const std::vector<Label>& labels) {
    if (labels.size() != tree.size())
        throw InvalidInputError("nearest_label: labels not aligned with reference points");
    return labels[static_cast<std::size_t>(tree.nearest(query))];
}

}  // namespace artik
