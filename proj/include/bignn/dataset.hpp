#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <utility>

namespace bignn {

// Row-major point storage: row i is one observation. Row-major keeps each
// point contiguous for distance kernels.
using PointMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstVecRef = Eigen::Ref<const Eigen::VectorXd>;

struct LabeledPoint {
    Eigen::VectorXd features;
    int label = 0;  // in {0, 1}
};

// Training/test container: N rows of dimension d plus binary labels.
struct Dataset {
    PointMatrix features;     // N x d
    Eigen::VectorXi labels;   // N, entries in {0, 1}

    Dataset() = default;
    Dataset(PointMatrix f, Eigen::VectorXi l) : features(std::move(f)), labels(std::move(l)) {
        validate();
    }

    Eigen::Index size() const { return features.rows(); }
    Eigen::Index dim() const { return features.cols(); }

    LabeledPoint point(Eigen::Index i) const {
        return LabeledPoint{features.row(i).transpose(), labels[i]};
    }

    void validate() const {
        if (features.rows() < 1) throw std::invalid_argument("Dataset: need at least one point");
        if (features.rows() != labels.size())
            throw std::invalid_argument("Dataset: feature/label count mismatch");
        if (!features.allFinite()) throw std::invalid_argument("Dataset: non-finite coordinate");
        for (Eigen::Index i = 0; i < labels.size(); ++i)
            if (labels[i] != 0 && labels[i] != 1)
                throw std::invalid_argument("Dataset: label not in {0,1}");
    }
};

}  // namespace bignn
