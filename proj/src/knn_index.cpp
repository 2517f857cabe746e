#include "bignn/knn_index.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <tuple>

namespace bignn {

namespace {

// Shared metric kernel. Both search variants must produce bit-identical
// distances or tie ordering could differ between them.
inline double squared_distance(const PointMatrix& pts, int row, ConstVecRef x) {
    return (pts.row(row).transpose() - x).squaredNorm();
}

}  // namespace

double mean_label(const NeighborSet& neighbors) {
    if (neighbors.entries.empty()) throw std::logic_error("mean_label: empty neighbor set");
    long long sum = 0;
    for (const auto& e : neighbors.entries) sum += e.label;
    return static_cast<double>(sum) / static_cast<double>(neighbors.entries.size());
}

KnnIndex::KnnIndex(const KnnIndex& other)
    : points_(other.points_),
      labels_(other.labels_),
      original_indices_(other.original_indices_),
      kind_(other.kind_),
      nodes_(other.nodes_),
      order_(other.order_),
      root_(other.root_),
      query_count_(other.query_count_.load(std::memory_order_relaxed)) {}

KnnIndex& KnnIndex::operator=(const KnnIndex& other) {
    if (this != &other) {
        points_ = other.points_;
        labels_ = other.labels_;
        original_indices_ = other.original_indices_;
        kind_ = other.kind_;
        nodes_ = other.nodes_;
        order_ = other.order_;
        root_ = other.root_;
        query_count_.store(other.query_count_.load(std::memory_order_relaxed),
                           std::memory_order_relaxed);
    }
    return *this;
}

KnnIndex::KnnIndex(KnnIndex&& other) noexcept
    : points_(std::move(other.points_)),
      labels_(std::move(other.labels_)),
      original_indices_(std::move(other.original_indices_)),
      kind_(other.kind_),
      nodes_(std::move(other.nodes_)),
      order_(std::move(other.order_)),
      root_(other.root_),
      query_count_(other.query_count_.load(std::memory_order_relaxed)) {}

KnnIndex& KnnIndex::operator=(KnnIndex&& other) noexcept {
    if (this != &other) {
        points_ = std::move(other.points_);
        labels_ = std::move(other.labels_);
        original_indices_ = std::move(other.original_indices_);
        kind_ = other.kind_;
        nodes_ = std::move(other.nodes_);
        order_ = std::move(other.order_);
        root_ = other.root_;
        query_count_.store(other.query_count_.load(std::memory_order_relaxed),
                           std::memory_order_relaxed);
    }
    return *this;
}

KnnIndex KnnIndex::build(const PointMatrix& points, const Eigen::VectorXi& labels,
                         IndexKind kind) {
    std::vector<int> ids(static_cast<size_t>(points.rows()));
    for (size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<int>(i);
    return build(points, labels, std::move(ids), kind);
}

KnnIndex KnnIndex::build(const std::vector<LabeledPoint>& pts, IndexKind kind) {
    if (pts.empty()) throw std::invalid_argument("build_index: empty point list");
    const Eigen::Index d = pts.front().features.size();
    PointMatrix m(static_cast<Eigen::Index>(pts.size()), d);
    Eigen::VectorXi labels(static_cast<Eigen::Index>(pts.size()));
    for (size_t i = 0; i < pts.size(); ++i) {
        if (pts[i].features.size() != d)
            throw std::invalid_argument("build_index: inconsistent point dimensions");
        m.row(static_cast<Eigen::Index>(i)) = pts[i].features.transpose();
        labels[static_cast<Eigen::Index>(i)] = pts[i].label;
    }
    return build(m, labels, kind);
}

KnnIndex KnnIndex::build(const PointMatrix& points, const Eigen::VectorXi& labels,
                         std::vector<int> original_indices, IndexKind kind) {
    if (points.rows() < 1) throw std::invalid_argument("build_index: empty point list");
    if (points.rows() != labels.size() ||
        points.rows() != static_cast<Eigen::Index>(original_indices.size()))
        throw std::invalid_argument("build_index: points/labels/indices size mismatch");
    if (!points.allFinite()) throw std::invalid_argument("build_index: non-finite coordinate");

    KnnIndex index;
    index.points_ = points;
    index.labels_ = labels;
    index.original_indices_ = std::move(original_indices);
    index.kind_ = kind;
    if (kind == IndexKind::KdTree) {
        const int n = static_cast<int>(points.rows());
        index.order_.resize(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) index.order_[static_cast<size_t>(i)] = i;
        index.nodes_.reserve(static_cast<size_t>(2 * n / kLeafSize + 2));
        index.root_ = index.build_node(0, n);
    }
    return index;
}

int KnnIndex::build_node(int begin, int end) {
    const int node_id = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    Node& node = nodes_.back();
    node.begin = begin;
    node.end = end;

    const int count = end - begin;
    if (count <= kLeafSize) return node_id;

    // Widest-spread dimension.
    int best_dim = 0;
    double best_spread = -1.0;
    for (int dim = 0; dim < static_cast<int>(points_.cols()); ++dim) {
        double lo = points_(order_[static_cast<size_t>(begin)], dim);
        double hi = lo;
        for (int i = begin + 1; i < end; ++i) {
            const double v = points_(order_[static_cast<size_t>(i)], dim);
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        const double spread = hi - lo;
        if (spread > best_spread) {
            best_spread = spread;
            best_dim = dim;
        }
    }
    if (best_spread <= 0.0) return node_id;  // all points coincide, keep as leaf

    const int mid = begin + count / 2;
    auto first = order_.begin() + begin;
    auto median = order_.begin() + mid;
    auto last = order_.begin() + end;
    std::nth_element(first, median, last, [&](int a, int b) {
        const double va = points_(a, best_dim);
        const double vb = points_(b, best_dim);
        if (va != vb) return va < vb;
        return a < b;  // deterministic layout
    });

    const int split_point = order_[static_cast<size_t>(mid)];
    const int left = build_node(begin, mid);
    const int right = build_node(mid, end);
    // nodes_ may have reallocated during recursion
    Node& n = nodes_[static_cast<size_t>(node_id)];
    n.split_dim = best_dim;
    n.split_value = points_(split_point, best_dim);
    n.left = left;
    n.right = right;
    return node_id;
}

NeighborSet KnnIndex::query(ConstVecRef x, int k) const {
    if (k < 1) throw std::invalid_argument("query_knn: k must be >= 1");
    if (x.size() != points_.cols())
        throw std::invalid_argument("query_knn: query dimension mismatch");
    query_count_.fetch_add(1, std::memory_order_relaxed);

    const int n = static_cast<int>(points_.rows());
    const int want = std::min(k, n);

    // Max-heap on (squared distance, original index, local row); the top is
    // the current worst keeper, so the lexicographic ordering enforces the
    // tie rule. Original indices are unique, so the local row never decides.
    using Cand = std::tuple<double, int, int>;
    std::vector<Cand> heap;
    heap.reserve(static_cast<size_t>(want) + 1);

    auto offer = [&](int local_row) {
        const double d2 = squared_distance(points_, local_row, x);
        const Cand cand{d2, original_indices_[static_cast<size_t>(local_row)], local_row};
        if (static_cast<int>(heap.size()) < want) {
            heap.push_back(cand);
            std::push_heap(heap.begin(), heap.end());
        } else if (cand < heap.front()) {
            std::pop_heap(heap.begin(), heap.end());
            heap.back() = cand;
            std::push_heap(heap.begin(), heap.end());
        }
    };

    if (kind_ == IndexKind::BruteForce || root_ < 0) {
        for (int i = 0; i < n; ++i) offer(i);
    } else {
        struct Frame {
            int node;
            double axial_d2;  // lower bound on squared distance to the node's region
        };
        std::vector<Frame> stack;
        stack.push_back({root_, 0.0});
        while (!stack.empty()) {
            const Frame frame = stack.back();
            stack.pop_back();
            // Prune only on strictly greater: an equal-distance point with a
            // smaller original index may still displace the current worst.
            if (static_cast<int>(heap.size()) == want && frame.axial_d2 > std::get<0>(heap.front()))
                continue;
            const Node& node = nodes_[static_cast<size_t>(frame.node)];
            if (node.split_dim < 0) {
                for (int i = node.begin; i < node.end; ++i)
                    offer(order_[static_cast<size_t>(i)]);
                continue;
            }
            const double delta = x[node.split_dim] - node.split_value;
            const double far_d2 = delta * delta;
            const int near_child = delta < 0 ? node.left : node.right;
            const int far_child = delta < 0 ? node.right : node.left;
            stack.push_back({far_child, std::max(frame.axial_d2, far_d2)});
            stack.push_back({near_child, frame.axial_d2});
        }
    }

    std::sort_heap(heap.begin(), heap.end());
    NeighborSet result;
    result.k_requested = k;
    result.entries.reserve(heap.size());
    for (const auto& [d2, orig, local] : heap) {
        NeighborSet::Entry e;
        e.index = orig;
        e.distance = std::sqrt(d2);
        e.label = labels_[static_cast<size_t>(local)];
        result.entries.push_back(e);
    }
    return result;
}

}  // namespace bignn
