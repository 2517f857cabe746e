#pragma once

#include <vector>

#include "bignn/dataset.hpp"
#include "bignn/rng.hpp"

namespace bignn {

// One mixture component with covariance scale * identity.
struct GaussianComponent {
    Eigen::VectorXd mean;
    double scale = 1.0;   // variance multiplier, > 0
    double weight = 1.0;  // mixture weight, class weights sum to 1
};

// Binary-class generative model: each class is a Gaussian mixture with
// spherical components; pi1 is the prior probability of class 1.
struct GaussianClassModel {
    std::vector<GaussianComponent> class0;
    std::vector<GaussianComponent> class1;
    double pi1 = 0.5;

    Eigen::Index dim() const { return class0.empty() ? 0 : class0.front().mean.size(); }
    void validate() const;
};

// d=5, P0 ~ N(0, I), P1 ~ N(1, I), pi1 = 1/2.
GaussianClassModel sim1_model();

// d=8, P1 ~ 0.5 N(0, I) + 0.5 N(3, 2I), P0 ~ 0.5 N(1.5, I) + 0.5 N(4.5, 2I),
// pi1 = 1/3.
GaussianClassModel sim3_model();

Dataset sample(const GaussianClassModel& model, Eigen::Index n, RngStream& rng);

// Posterior probability of class 1, computed in log space.
double eta(const GaussianClassModel& model, ConstVecRef x);

// 1 iff eta(x) > 1/2 (tie resolves to 0).
int bayes_classify(const GaussianClassModel& model, ConstVecRef x);

struct BayesRiskEstimate {
    double estimate = 0.0;       // Monte-Carlo value
    double std_error = 0.0;      // binomial standard error
    bool has_closed_form = false;
    double closed_form = 0.0;    // Phi(-|mu1 - mu0| / (2 sigma)) when applicable

    // Closed form when available, else the Monte-Carlo estimate.
    double value() const { return has_closed_form ? closed_form : estimate; }
};

// Monte-Carlo Bayes risk; attaches the closed form for a symmetric pair of
// single equal-scale components.
BayesRiskEstimate bayes_risk(const GaussianClassModel& model, long long mc_samples, RngStream& rng);

// Phi(-|mu1 - mu0| / (2 sigma)) for a balanced pair of single equal-scale
// components; NaN when that form does not apply.
double closed_form_bayes_risk(const GaussianClassModel& model);

// Standard normal CDF.
double normal_cdf(double z);

}  // namespace bignn
