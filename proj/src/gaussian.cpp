#include "bignn/gaussian.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace bignn {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

void validate_components(const std::vector<GaussianComponent>& components, Eigen::Index d,
                         const char* which) {
    if (components.empty())
        throw std::invalid_argument(std::string("GaussianClassModel: empty ") + which);
    double total = 0.0;
    for (const auto& c : components) {
        if (c.mean.size() != d)
            throw std::invalid_argument("GaussianClassModel: inconsistent component dimension");
        if (!(c.scale > 0))
            throw std::invalid_argument("GaussianClassModel: covariance scale must be positive");
        if (c.weight < 0)
            throw std::invalid_argument("GaussianClassModel: negative component weight");
        total += c.weight;
    }
    if (std::abs(total - 1.0) > 1e-9)
        throw std::invalid_argument(std::string("GaussianClassModel: ") + which +
                                    " weights do not sum to 1");
}

// log p(x) for one spherical Gaussian.
double log_component_density(const GaussianComponent& c, ConstVecRef x) {
    const double d = static_cast<double>(x.size());
    const double q = (x - c.mean).squaredNorm() / (2.0 * c.scale);
    return -0.5 * d * std::log(kTwoPi * c.scale) - q;
}

// log of the mixture density via logsumexp over components.
double log_mixture_density(const std::vector<GaussianComponent>& components, ConstVecRef x) {
    double max_term = -std::numeric_limits<double>::infinity();
    std::vector<double> terms;
    terms.reserve(components.size());
    for (const auto& c : components) {
        if (c.weight <= 0) {
            terms.push_back(-std::numeric_limits<double>::infinity());
            continue;
        }
        const double t = std::log(c.weight) + log_component_density(c, x);
        terms.push_back(t);
        max_term = std::max(max_term, t);
    }
    if (!std::isfinite(max_term)) return -std::numeric_limits<double>::infinity();
    double acc = 0.0;
    for (double t : terms) acc += std::exp(t - max_term);
    return max_term + std::log(acc);
}

Eigen::VectorXd draw_from_class(const std::vector<GaussianComponent>& components,
                                Eigen::Index d, RngStream& rng) {
    size_t pick = components.size() - 1;
    if (components.size() > 1) {
        const double u = rng.uniform();
        double cum = 0.0;
        for (size_t c = 0; c < components.size(); ++c) {
            cum += components[c].weight;
            if (u < cum) {
                pick = c;
                break;
            }
        }
    }
    const GaussianComponent& comp = components[pick];
    const double sigma = std::sqrt(comp.scale);
    Eigen::VectorXd x(d);
    for (Eigen::Index j = 0; j < d; ++j) x[j] = comp.mean[j] + sigma * rng.normal();
    return x;
}

}  // namespace

void GaussianClassModel::validate() const {
    if (class0.empty() || class1.empty())
        throw std::invalid_argument("GaussianClassModel: both classes need components");
    const Eigen::Index d = class0.front().mean.size();
    if (d < 1) throw std::invalid_argument("GaussianClassModel: dimension must be >= 1");
    validate_components(class0, d, "class0");
    validate_components(class1, d, "class1");
    if (class1.front().mean.size() != d)
        throw std::invalid_argument("GaussianClassModel: class dimension mismatch");
    if (!(pi1 >= 0.0 && pi1 <= 1.0))
        throw std::invalid_argument("GaussianClassModel: pi1 must lie in [0,1]");
}

GaussianClassModel sim1_model() {
    GaussianClassModel m;
    m.class0.push_back({Eigen::VectorXd::Zero(5), 1.0, 1.0});
    m.class1.push_back({Eigen::VectorXd::Ones(5), 1.0, 1.0});
    m.pi1 = 0.5;
    return m;
}

GaussianClassModel sim3_model() {
    const int d = 8;
    GaussianClassModel m;
    m.class1.push_back({Eigen::VectorXd::Zero(d), 1.0, 0.5});
    m.class1.push_back({Eigen::VectorXd::Constant(d, 3.0), 2.0, 0.5});
    m.class0.push_back({Eigen::VectorXd::Constant(d, 1.5), 1.0, 0.5});
    m.class0.push_back({Eigen::VectorXd::Constant(d, 4.5), 2.0, 0.5});
    m.pi1 = 1.0 / 3.0;
    return m;
}

Dataset sample(const GaussianClassModel& model, Eigen::Index n, RngStream& rng) {
    model.validate();
    if (n < 1) throw std::invalid_argument("sample: n must be >= 1");
    const Eigen::Index d = model.dim();
    PointMatrix features(n, d);
    Eigen::VectorXi labels(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const int y = rng.bernoulli(model.pi1) ? 1 : 0;
        labels[i] = y;
        features.row(i) = draw_from_class(y == 1 ? model.class1 : model.class0, d, rng).transpose();
    }
    return Dataset(std::move(features), std::move(labels));
}

double eta(const GaussianClassModel& model, ConstVecRef x) {
    if (x.size() != model.dim()) throw std::invalid_argument("eta: dimension mismatch");
    if (model.pi1 <= 0.0) return 0.0;
    if (model.pi1 >= 1.0) return 1.0;
    const double log_p1 = std::log(model.pi1) + log_mixture_density(model.class1, x);
    const double log_p0 = std::log(1.0 - model.pi1) + log_mixture_density(model.class0, x);
    // eta = 1 / (1 + exp(log_p0 - log_p1)), clamped against overflow.
    const double diff = log_p0 - log_p1;
    if (diff > 700.0) return 0.0;
    if (diff < -700.0) return 1.0;
    return 1.0 / (1.0 + std::exp(diff));
}

int bayes_classify(const GaussianClassModel& model, ConstVecRef x) {
    return eta(model, x) > 0.5 ? 1 : 0;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

BayesRiskEstimate bayes_risk(const GaussianClassModel& model, long long mc_samples, RngStream& rng) {
    model.validate();
    if (mc_samples < 1) throw std::invalid_argument("bayes_risk: mc_samples must be >= 1");

    const Eigen::Index d = model.dim();
    long long wrong = 0;
    for (long long i = 0; i < mc_samples; ++i) {
        const int y = rng.bernoulli(model.pi1) ? 1 : 0;
        const Eigen::VectorXd x = draw_from_class(y == 1 ? model.class1 : model.class0, d, rng);
        wrong += bayes_classify(model, x) != y;
    }

    BayesRiskEstimate out;
    out.estimate = static_cast<double>(wrong) / static_cast<double>(mc_samples);
    out.std_error = std::sqrt(std::max(out.estimate * (1.0 - out.estimate), 0.0) /
                              static_cast<double>(mc_samples));

    const double cf = closed_form_bayes_risk(model);
    if (std::isfinite(cf)) {
        out.has_closed_form = true;
        out.closed_form = cf;
    }
    return out;
}

double closed_form_bayes_risk(const GaussianClassModel& model) {
    // Symmetric two-Gaussian case: risk = Phi(-delta / (2 sigma)).
    if (model.class0.size() == 1 && model.class1.size() == 1 &&
        model.class0[0].scale == model.class1[0].scale && model.pi1 == 0.5) {
        const double delta = (model.class1[0].mean - model.class0[0].mean).norm();
        const double sigma = std::sqrt(model.class0[0].scale);
        return normal_cdf(-delta / (2.0 * sigma));
    }
    return std::numeric_limits<double>::quiet_NaN();
}

}  // namespace bignn
