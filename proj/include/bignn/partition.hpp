#pragma once

#include <vector>

#include "bignn/dataset.hpp"
#include "bignn/rng.hpp"

namespace bignn {

// Assignment of N points to s subsamples, s = round(N^gamma) clamped to
// [1, N]. Subsample sizes differ by at most one.
struct PartitionPlan {
    double gamma = 0.0;
    int s = 1;                    // number of subsamples
    int n = 1;                    // min subsample size, floor(N/s)
    std::vector<int> assignment;  // point index -> subsample index

    std::vector<std::vector<int>> subsample_indices() const {
        std::vector<std::vector<int>> groups(static_cast<size_t>(s));
        for (size_t i = 0; i < assignment.size(); ++i)
            groups[static_cast<size_t>(assignment[i])].push_back(static_cast<int>(i));
        return groups;
    }
};

// Nearest integer, half away from zero.
long long round_half_away(double x);

// Number of subsamples for a given N and split coefficient.
int subsample_count(Eigen::Index n_total, double gamma);

// Uniform random shuffle followed by round-robin slicing. Deterministic
// given the stream.
PartitionPlan make_partition(const Dataset& dataset, double gamma, RngStream& rng);

// Smoothness-exponent conversion alpha = alpha_H / d.
double alpha_from_holder(double alpha_h, int d);

}  // namespace bignn
