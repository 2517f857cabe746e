#include "bignn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "bignn/errors.hpp"

namespace bignn {

double empirical_risk(const std::vector<int>& predictions, const std::vector<int>& truth) {
    if (predictions.empty() || predictions.size() != truth.size())
        throw std::invalid_argument("empirical_risk: prediction/truth length mismatch");
    long long wrong = 0;
    for (size_t i = 0; i < predictions.size(); ++i) wrong += predictions[i] != truth[i];
    return static_cast<double>(wrong) / static_cast<double>(predictions.size());
}

double disagreement(const std::vector<int>& a, const std::vector<int>& b) {
    return empirical_risk(a, b);
}

double empirical_cis(const TrainerFn& trainer, const GaussianClassModel& model_spec,
                     Eigen::Index n, const PointMatrix& test_points, int pairs, RngStream& rng) {
    if (pairs < 1) throw std::invalid_argument("empirical_cis: pairs must be >= 1");
    if (test_points.rows() < 1) throw std::invalid_argument("empirical_cis: empty test set");

    double total = 0.0;
    for (int p = 0; p < pairs; ++p) {
        RngStream draw_a = rng.fork("cis-draw-a", static_cast<uint64_t>(p));
        RngStream draw_b = rng.fork("cis-draw-b", static_cast<uint64_t>(p));
        RngStream train_a = rng.fork("cis-train-a", static_cast<uint64_t>(p));
        RngStream train_b = rng.fork("cis-train-b", static_cast<uint64_t>(p));
        const Dataset da = sample(model_spec, n, draw_a);
        const Dataset db = sample(model_spec, n, draw_b);
        const ClassifierFn ca = trainer(da, train_a);
        const ClassifierFn cb = trainer(db, train_b);
        long long diff = 0;
        for (Eigen::Index i = 0; i < test_points.rows(); ++i) {
            const Eigen::VectorXd x = test_points.row(i).transpose();
            diff += ca(x) != cb(x);
        }
        total += static_cast<double>(diff) / static_cast<double>(test_points.rows());
    }
    return total / static_cast<double>(pairs);
}

RateFit fit_rate(const std::vector<RateRow>& rows) {
    if (rows.size() < 2) throw DataError("fit_rate: need at least two rows");

    std::map<double, int> gamma_col;
    std::map<double, int> n_count;
    for (size_t i = 0; i < rows.size(); ++i) {
        if (!(rows[i].value > 0))
            throw DataError("fit_rate: nonpositive value at row " + std::to_string(i));
        if (!(rows[i].n > 0))
            throw DataError("fit_rate: nonpositive N at row " + std::to_string(i));
        gamma_col.emplace(rows[i].gamma, 0);
        n_count[rows[i].n]++;
    }
    if (n_count.size() < 2) throw DataError("fit_rate: need at least two distinct N values");
    {
        std::map<double, std::map<double, int>> per_gamma_n;
        for (const auto& r : rows) per_gamma_n[r.gamma][r.n]++;
        for (const auto& [g, ns] : per_gamma_n)
            if (ns.size() < 2)
                throw DataError("fit_rate: gamma " + std::to_string(g) +
                                " appears with fewer than two N values");
    }
    int col = 0;
    for (auto& [g, c] : gamma_col) c = col++;

    // Design: one indicator column per gamma plus the shared log N column.
    const int p = static_cast<int>(gamma_col.size()) + 1;
    const int m = static_cast<int>(rows.size());
    Eigen::MatrixXd X = Eigen::MatrixXd::Zero(m, p);
    Eigen::VectorXd y(m);
    for (int i = 0; i < m; ++i) {
        X(i, gamma_col[rows[static_cast<size_t>(i)].gamma]) = 1.0;
        X(i, p - 1) = std::log(rows[static_cast<size_t>(i)].n);
        y[i] = std::log(rows[static_cast<size_t>(i)].value);
    }

    const Eigen::MatrixXd xtx = X.transpose() * X;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(xtx);
    if (lu.rank() < p) throw DataError("fit_rate: rank-deficient design");
    const Eigen::MatrixXd xtx_inv = lu.inverse();
    const Eigen::VectorXd beta = xtx_inv * (X.transpose() * y);

    const Eigen::VectorXd fitted = X * beta;
    const Eigen::VectorXd resid = y - fitted;

    RateFit out;
    out.slope = beta[p - 1];
    for (const auto& [g, c] : gamma_col) out.intercepts[g] = beta[c];

    if (m > p) {
        const double s2 = resid.squaredNorm() / static_cast<double>(m - p);
        out.slope_stderr = std::sqrt(s2 * xtx_inv(p - 1, p - 1));
    }

    const double y_mean = y.mean();
    const double f_mean = fitted.mean();
    double syy = 0, sff = 0, syf = 0;
    for (int i = 0; i < m; ++i) {
        syy += (y[i] - y_mean) * (y[i] - y_mean);
        sff += (fitted[i] - f_mean) * (fitted[i] - f_mean);
        syf += (y[i] - y_mean) * (fitted[i] - f_mean);
    }
    out.correlation = (syy > 0 && sff > 0) ? syf / std::sqrt(syy * sff) : 1.0;
    return out;
}

double speedup(double oracle_ms, double bignn_ms) {
    if (!(bignn_ms > 0)) throw std::invalid_argument("speedup: bignn time must be positive");
    return oracle_ms / bignn_ms;
}

namespace {

std::vector<double> average_ranks(const std::vector<double>& v) {
    const size_t n = v.size();
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(n, 0.0);
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (size_t t = i; t <= j; ++t) ranks[order[t]] = r;
        i = j + 1;
    }
    return ranks;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    const size_t n = a.size();
    double ma = 0, mb = 0;
    for (size_t i = 0; i < n; ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= static_cast<double>(n);
    mb /= static_cast<double>(n);
    double saa = 0, sbb = 0, sab = 0;
    for (size_t i = 0; i < n; ++i) {
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
        sab += (a[i] - ma) * (b[i] - mb);
    }
    if (saa <= 0 || sbb <= 0) return 0.0;
    return sab / std::sqrt(saa * sbb);
}

}  // namespace

double spearman_rho(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.size() < 2)
        throw std::invalid_argument("spearman_rho: need two equal-length vectors of size >= 2");
    const std::vector<double> ra = average_ranks(a);
    const std::vector<double> rb = average_ranks(b);
    return pearson(ra, rb);
}

double spearman_pvalue_neg(const std::vector<double>& a, const std::vector<double>& b) {
    const double observed = spearman_rho(a, b);
    const size_t n = a.size();

    if (n <= 8) {
        // Exact permutation distribution of rho under independence.
        const std::vector<double> rb = average_ranks(b);
        std::vector<size_t> perm(n);
        std::iota(perm.begin(), perm.end(), size_t{0});
        long long at_most = 0, total = 0;
        std::vector<double> pa(n);
        const std::vector<double> ra = average_ranks(a);
        do {
            for (size_t i = 0; i < n; ++i) pa[i] = ra[perm[i]];
            at_most += pearson(pa, rb) <= observed + 1e-12;
            ++total;
        } while (std::next_permutation(perm.begin(), perm.end()));
        return static_cast<double>(at_most) / static_cast<double>(total);
    }

    // t approximation with n - 2 degrees of freedom, one-sided lower tail.
    const double nn = static_cast<double>(n);
    const double denom = std::max(1.0 - observed * observed, 1e-12);
    const double t = observed * std::sqrt((nn - 2.0) / denom);
    // Normal tail is adequate for the grid sizes used here.
    return normal_cdf(t);
}

}  // namespace bignn
