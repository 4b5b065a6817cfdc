#pragma once

#include <string>
#include <vector>

#include "matclip/tensor.hpp"

namespace matclip {

// Exact KD-tree over descriptor points: median splits cycling axes, ties in
// queries broken by ascending id. Membership in a sampled subspace means the
// nearest stored sample lies within a caller-chosen radius.
class KdTree {
public:
    struct Hit {
        std::string id;
        double distance = 0.0;
    };

    static KdTree build(const std::vector<std::string>& ids, const Mat<float>& points);

    Hit nearest(const std::vector<float>& query) const;
    bool contains(const std::vector<float>& query, double radius) const;

    int dim() const { return points_.cols; }
    std::size_t size() const { return ids_.size(); }
    const Mat<float>& points() const { return points_; }
    const std::vector<std::string>& ids() const { return ids_; }

private:
    struct Node {
        int axis = -1;
        float threshold = 0.0f;
        int left = -1;
        int right = -1;
        int point = -1;  // leaf payload
    };

    int build_range(std::vector<int>& order, int lo, int hi, int depth);
    void search(int node, const float* q, double& best_sq, int& best_idx) const;

    Mat<float> points_;
    std::vector<std::string> ids_;
    std::vector<Node> nodes_;
    int root_ = -1;
};

// Greedy in-order thinning: a point is kept iff it lies strictly farther than
// radius from every already-kept point. Returns kept row indices in order.
std::vector<int> thin(const Mat<float>& points, double radius);

}  // namespace matclip
