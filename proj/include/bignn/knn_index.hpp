#pragma once

#include <atomic>
#include <cstdint>
#include <vector>

#include "bignn/dataset.hpp"

namespace bignn {

// k nearest neighbors of one query, sorted ascending by the composite key
// (distance, original_index).
struct NeighborSet {
    struct Entry {
        int index = 0;         // index of the point in the backing set
        double distance = 0;   // Euclidean distance to the query
        int label = 0;
    };
    std::vector<Entry> entries;
    int k_requested = 0;
};

// Mean of the neighbor labels.
double mean_label(const NeighborSet& neighbors);

enum class IndexKind { KdTree, BruteForce };

// Immutable exact nearest-neighbor index over a point set. The kd-tree
// variant splits at the median of the widest-spread dimension with leaf
// size 16; the brute-force variant is the correctness oracle. Both break
// distance ties by smaller original index, so their outputs are identical
// entry for entry.
class KnnIndex {
public:
    KnnIndex() = default;

    static KnnIndex build(const PointMatrix& points, const Eigen::VectorXi& labels,
                          IndexKind kind = IndexKind::KdTree);
    static KnnIndex build(const PointMatrix& points, const Eigen::VectorXi& labels,
                          std::vector<int> original_indices, IndexKind kind = IndexKind::KdTree);
    static KnnIndex build(const std::vector<LabeledPoint>& points,
                          IndexKind kind = IndexKind::KdTree);

    NeighborSet query(ConstVecRef x, int k) const;

    Eigen::Index size() const { return points_.rows(); }
    Eigen::Index dim() const { return points_.cols(); }
    IndexKind kind() const { return kind_; }

    ConstVecRef point_features(int i) const { return points_.row(i).transpose(); }
    int point_label(int i) const { return labels_[i]; }
    int original_index(int i) const { return original_indices_[static_cast<size_t>(i)]; }
    const PointMatrix& points() const { return points_; }
    const Eigen::VectorXi& labels() const { return labels_; }

    // Instrumentation: number of queries answered since build.
    uint64_t query_count() const { return query_count_.load(std::memory_order_relaxed); }

    KnnIndex(const KnnIndex& other);
    KnnIndex& operator=(const KnnIndex& other);
    KnnIndex(KnnIndex&& other) noexcept;
    KnnIndex& operator=(KnnIndex&& other) noexcept;
    ~KnnIndex() = default;

private:
    struct Node {
        int split_dim = -1;      // -1 marks a leaf
        double split_value = 0;
        int left = -1;
        int right = -1;
        int begin = 0;           // leaf range into order_
        int end = 0;
    };

    static constexpr int kLeafSize = 16;

    int build_node(int begin, int end);

    PointMatrix points_;             // local row id -> coordinates
    Eigen::VectorXi labels_;
    std::vector<int> original_indices_;
    IndexKind kind_ = IndexKind::KdTree;
    std::vector<Node> nodes_;
    std::vector<int> order_;         // permutation of local row ids, leaf ranges
    int root_ = -1;
    mutable std::atomic<uint64_t> query_count_{0};
};

// Spec-facing constructor name: kd-tree variant over labeled points.
inline KnnIndex build_index(const std::vector<LabeledPoint>& points,
                            IndexKind kind = IndexKind::KdTree) {
    return KnnIndex::build(points, kind);
}

inline NeighborSet query_knn(const KnnIndex& index, ConstVecRef x, int k) {
    return index.query(x, k);
}

}  // namespace bignn
