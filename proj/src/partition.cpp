#include "bignn/partition.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace bignn {

long long round_half_away(double x) {
    return static_cast<long long>(std::llround(x));
}

int subsample_count(Eigen::Index n_total, double gamma) {
    if (n_total < 1) throw std::invalid_argument("subsample_count: need at least one point");
    if (!(gamma >= 0.0 && gamma < 1.0))
        throw std::invalid_argument("subsample_count: gamma must lie in [0,1)");
    const double raw = std::pow(static_cast<double>(n_total), gamma);
    long long s = round_half_away(raw);
    s = std::max<long long>(1, std::min<long long>(s, n_total));
    return static_cast<int>(s);
}

PartitionPlan make_partition(const Dataset& dataset, double gamma, RngStream& rng) {
    if (!(gamma >= 0.0 && gamma < 1.0))
        throw std::invalid_argument("make_partition: gamma must lie in [0,1)");
    const int n_total = static_cast<int>(dataset.size());
    if (n_total < 1) throw std::invalid_argument("make_partition: empty dataset");

    PartitionPlan plan;
    plan.gamma = gamma;
    plan.s = subsample_count(n_total, gamma);
    plan.n = n_total / plan.s;

    std::vector<int> order(static_cast<size_t>(n_total));
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);

    plan.assignment.assign(static_cast<size_t>(n_total), 0);
    for (int pos = 0; pos < n_total; ++pos)
        plan.assignment[static_cast<size_t>(order[static_cast<size_t>(pos)])] = pos % plan.s;
    return plan;
}

double alpha_from_holder(double alpha_h, int d) {
    if (alpha_h <= 0.0) throw std::invalid_argument("alpha_from_holder: alpha_H must be positive");
    if (d < 1) throw std::invalid_argument("alpha_from_holder: dimension must be >= 1");
    return alpha_h / static_cast<double>(d);
}

}  // namespace bignn
