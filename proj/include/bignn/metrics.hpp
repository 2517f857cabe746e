#pragma once

#include <functional>
#include <map>
#include <vector>

#include "bignn/dataset.hpp"
#include "bignn/gaussian.hpp"
#include "bignn/rng.hpp"

namespace bignn {

double empirical_risk(const std::vector<int>& predictions, const std::vector<int>& truth);

// A trained classifier as a callable, and a procedure that produces one
// from a training set.
using ClassifierFn = std::function<int(ConstVecRef)>;
using TrainerFn = std::function<ClassifierFn(const Dataset&, RngStream&)>;

// Classification instability: mean disagreement fraction on test_points
// between classifiers trained on independent size-n training draws.
double empirical_cis(const TrainerFn& trainer, const GaussianClassModel& model_spec,
                     Eigen::Index n, const PointMatrix& test_points, int pairs, RngStream& rng);

// Disagreement fraction between two fixed prediction vectors.
double disagreement(const std::vector<int>& a, const std::vector<int>& b);

struct RateRow {
    double gamma = 0.0;
    double n = 0.0;      // training size N
    double value = 0.0;  // regret or CIS, must be positive
};

struct RateFit {
    double slope = 0.0;                    // shared coefficient of log N
    double slope_stderr = 0.0;
    std::map<double, double> intercepts;   // gamma -> intercept
    double correlation = 0.0;              // fitted vs observed log values
};

// OLS of log(value) on log(N) with one intercept per gamma level.
RateFit fit_rate(const std::vector<RateRow>& rows);

double speedup(double oracle_ms, double bignn_ms);

// Spearman rank correlation; ties receive average ranks.
double spearman_rho(const std::vector<double>& a, const std::vector<double>& b);

// One-sided p-value for rho < 0. Exact permutation distribution for
// n <= 8, t approximation above.
double spearman_pvalue_neg(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace bignn
