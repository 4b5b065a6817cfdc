#include "matclip/subspace.hpp"

#include <algorithm>
#include <cmath>

#include "matclip/errors.hpp"

namespace matclip {

namespace {

double dist_sq(const float* a, const float* b, int n) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
        const double d = static_cast<double>(a[i]) - b[i];
        s += d * d;
    }
    return s;
}

}  // namespace

KdTree KdTree::build(const std::vector<std::string>& ids, const Mat<float>& points) {
    if (points.rows < 1) throw DimensionMismatch("cannot build a KD-tree over zero points");
    if (static_cast<int>(ids.size()) != points.rows)
        throw DimensionMismatch("id count does not match point count");

    KdTree tree;
    tree.points_ = points;
    tree.ids_ = ids;
    tree.nodes_.reserve(2 * static_cast<std::size_t>(points.rows));
    std::vector<int> order(static_cast<std::size_t>(points.rows));
    for (int i = 0; i < points.rows; ++i) order[static_cast<std::size_t>(i)] = i;
    tree.root_ = tree.build_range(order, 0, points.rows, 0);
    return tree;
}

int KdTree::build_range(std::vector<int>& order, int lo, int hi, int depth) {
    const int node_idx = static_cast<int>(nodes_.size());
    nodes_.emplace_back();

    if (hi - lo == 1) {
        nodes_[static_cast<std::size_t>(node_idx)].point = order[static_cast<std::size_t>(lo)];
        return node_idx;
    }

    const int axis = depth % points_.cols;
    const int mid = lo + (hi - lo) / 2;
    // total order (coordinate, original index) keeps the partition, and hence
    // the tree, deterministic under duplicate coordinates
    std::nth_element(order.begin() + lo, order.begin() + mid, order.begin() + hi,
                     [&](int a, int b) {
                         const float ca = points_(a, axis), cb = points_(b, axis);
                         if (ca != cb) return ca < cb;
                         return a < b;
                     });

    Node node;
    node.axis = axis;
    node.threshold = points_(order[static_cast<std::size_t>(mid)], axis);
    node.left = build_range(order, lo, mid, depth + 1);
    node.right = build_range(order, mid, hi, depth + 1);
    nodes_[static_cast<std::size_t>(node_idx)] = node;
    return node_idx;
}

void KdTree::search(int node_idx, const float* q, double& best_sq, int& best_idx) const {
    const Node& node = nodes_[static_cast<std::size_t>(node_idx)];
    if (node.point >= 0) {
        const double d = dist_sq(points_.row(node.point), q, points_.cols);
        if (best_idx < 0 || d < best_sq ||
            (d == best_sq && ids_[static_cast<std::size_t>(node.point)] <
                                 ids_[static_cast<std::size_t>(best_idx)])) {
            best_sq = d;
            best_idx = node.point;
        }
        return;
    }

    const double delta = static_cast<double>(q[node.axis]) - node.threshold;
    const int near = delta < 0.0 ? node.left : node.right;
    const int far = delta < 0.0 ? node.right : node.left;
    search(near, q, best_sq, best_idx);
    // The far side can still hold an equidistant lower id, so prune with <=.
    if (best_idx < 0 || delta * delta <= best_sq) search(far, q, best_sq, best_idx);
}

KdTree::Hit KdTree::nearest(const std::vector<float>& query) const {
    if (static_cast<int>(query.size()) != points_.cols)
        throw DimensionMismatch("query dimension does not match tree");
    double best_sq = 0.0;
    int best_idx = -1;
    search(root_, query.data(), best_sq, best_idx);
    return {ids_[static_cast<std::size_t>(best_idx)], std::sqrt(best_sq)};
}

bool KdTree::contains(const std::vector<float>& query, double radius) const {
    if (radius < 0.0) throw InvalidConfig("radius must be >= 0");
    return nearest(query).distance <= radius;
}

std::vector<int> thin(const Mat<float>& points, double radius) {
    if (radius < 0.0) throw InvalidConfig("radius must be >= 0");
    std::vector<int> kept;
    for (int i = 0; i < points.rows; ++i) {
        bool keep = true;
        for (int k : kept) {
            const double d = std::sqrt(dist_sq(points.row(i), points.row(k), points.cols));
            if (d <= radius) {
                keep = false;
                break;
            }
        }
        if (keep) kept.push_back(i);
    }
    return kept;
}

}  // namespace matclip
