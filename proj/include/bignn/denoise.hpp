#pragma once

#include <vector>

#include "bignn/classifier.hpp"
#include "bignn/dataset.hpp"
#include "bignn/knn_index.hpp"
#include "bignn/rng.hpp"

namespace bignn {

// Pre-trained accelerator: I subsamples of size m whose labels were replaced
// by the ensemble's own predictions; queries are answered by 1-NN lookups
// and a majority vote.
struct DenoisedModel {
    std::vector<KnnIndex> relabeled_subsamples;
    int m = 1;           // prediction-subsample size, round(N^theta)
    int I = 1;           // number of prediction subsamples
    double theta = 1.0;

    Eigen::Index dim() const {
        return relabeled_subsamples.empty() ? 0 : relabeled_subsamples.front().dim();
    }
};

// Builds the prediction subsamples. By default each subsample is drawn
// fresh without replacement; reuse_partition instead merges adjacent
// training subsamples of `model` until m points are collected.
DenoisedModel pretrain(const BigNnModel& model, const Dataset& dataset, double theta, int I,
                       RngStream& rng, bool reuse_partition = false, int threads = 1,
                       PhaseTiming* timing = nullptr);

// Strict majority over the I per-subsample 1-NN labels.
int predict_denoised(const DenoisedModel& dmodel, ConstVecRef x);

std::vector<int> predict_denoised_batch(const DenoisedModel& dmodel, const PointMatrix& queries,
                                        int threads = 1, PhaseTiming* timing = nullptr);

}  // namespace bignn
