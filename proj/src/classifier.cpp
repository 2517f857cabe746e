#include "bignn/classifier.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>
#include <string>

#include "bignn/errors.hpp"
#include "bignn/thread_pool.hpp"

namespace bignn {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

}  // namespace

int select_k(double alpha, long long n, long long s, double k_o) {
    if (!(alpha > 0)) throw std::invalid_argument("select_k: alpha must be positive");
    if (!(k_o > 0)) throw std::invalid_argument("select_k: k_o must be positive");
    if (n < 1 || s < 1) throw std::invalid_argument("select_k: n and s must be >= 1");
    const double e = 2.0 * alpha + 1.0;
    const double raw = k_o * std::pow(static_cast<double>(n), 2.0 * alpha / e) *
                       std::pow(static_cast<double>(s), -1.0 / e);
    return static_cast<int>(std::max<long long>(1, round_half_away(raw)));
}

int select_k_sim3(long long N, long long s, double K_exponent, double k_o_star) {
    if (N < 1 || s < 1) throw std::invalid_argument("select_k_sim3: N and s must be >= 1");
    if (!(K_exponent > 0) || !std::isfinite(K_exponent))
        throw std::invalid_argument("select_k_sim3: K_exponent must be positive");
    if (!(k_o_star > 0)) throw std::invalid_argument("select_k_sim3: k_o_star must be positive");
    const long long K = round_half_away(std::pow(static_cast<double>(N), K_exponent));
    const double raw = k_o_star * static_cast<double>(K) / static_cast<double>(s);
    return static_cast<int>(std::max<long long>(1, static_cast<long long>(std::ceil(raw))));
}

int divide_oracle_k(int k_oracle, long long s) {
    if (k_oracle < 1 || s < 1)
        throw std::invalid_argument("divide_oracle_k: arguments must be >= 1");
    return static_cast<int>(
        std::max<long long>(1, round_half_away(static_cast<double>(k_oracle) / static_cast<double>(s))));
}

double PhaseTiming::distributed_ms() const {
    double worst = 0.0;
    for (double t : per_worker_ms) worst = std::max(worst, t);
    return worst + coordination_ms;
}

double PhaseTiming::sequential_ms() const {
    double total = 0.0;
    for (double t : per_worker_ms) total += t;
    return total + coordination_ms;
}

BigNnModel train(const Dataset& dataset, double gamma, const KRule& rule, RngStream& rng,
                 IndexKind index_kind, int threads, PhaseTiming* timing) {
    dataset.validate();
    const auto t0 = Clock::now();
    PartitionPlan plan = make_partition(dataset, gamma, rng);
    const long long N = dataset.size();
    const long long s = plan.s;

    int k_local = 0;
    switch (rule.kind) {
        case KRuleKind::Fixed:
            if (rule.fixed_k < 1) throw ConfigError("train: fixed k must be >= 1");
            k_local = rule.fixed_k;
            break;
        case KRuleKind::Theorem:
            k_local = select_k(rule.alpha, N / s, s, rule.k_o);
            break;
        case KRuleKind::Sim3:
            k_local = select_k_sim3(N, s, rule.K_exponent, rule.k_o_star);
            break;
    }

    const auto groups = plan.subsample_indices();
    for (size_t j = 0; j < groups.size(); ++j) {
        if (static_cast<long long>(groups[j].size()) < k_local)
            throw ConfigError("train: k_local=" + std::to_string(k_local) +
                              " exceeds subsample " + std::to_string(j) + " of size " +
                              std::to_string(groups[j].size()));
    }

    BigNnModel model;
    model.k_local = k_local;
    model.gamma = gamma;
    model.k_o = rule.k_o;
    model.partition = std::move(plan);
    model.local_indices.resize(groups.size());
    const double coordination = ms_since(t0);

    std::vector<double> worker_ms(groups.size(), 0.0);
    parallel_for(groups.size(), threads, [&](size_t j) {
        const auto tj = Clock::now();
        const auto& idx = groups[j];
        PointMatrix pts(static_cast<Eigen::Index>(idx.size()), dataset.dim());
        Eigen::VectorXi labels(static_cast<Eigen::Index>(idx.size()));
        for (size_t r = 0; r < idx.size(); ++r) {
            pts.row(static_cast<Eigen::Index>(r)) = dataset.features.row(idx[r]);
            labels[static_cast<Eigen::Index>(r)] = dataset.labels[idx[r]];
        }
        model.local_indices[j] = KnnIndex::build(pts, labels, idx, index_kind);
        worker_ms[j] = ms_since(tj);
    });

    if (timing) {
        timing->per_worker_ms = std::move(worker_ms);
        timing->coordination_ms = coordination;
    }
    return model;
}

int predict_local(const KnnIndex& index, int k, ConstVecRef x) {
    const NeighborSet neighbors = index.query(x, k);
    long long ones = 0;
    for (const auto& e : neighbors.entries) ones += e.label;
    return 2 * ones > static_cast<long long>(neighbors.entries.size()) ? 1 : 0;
}

int majority_vote(const std::vector<int>& votes) {
    if (votes.empty()) throw std::invalid_argument("majority_vote: empty vote list");
    long long ones = 0;
    for (int v : votes) {
        if (v != 0 && v != 1) throw std::invalid_argument("majority_vote: vote not in {0,1}");
        ones += v;
    }
    return 2 * ones > static_cast<long long>(votes.size()) ? 1 : 0;
}

int predict(const BigNnModel& model, ConstVecRef x) {
    if (model.local_indices.empty()) throw std::invalid_argument("predict: empty model");
    long long ones = 0;
    for (const auto& index : model.local_indices) ones += predict_local(index, model.k_local, x);
    return 2 * ones > static_cast<long long>(model.local_indices.size()) ? 1 : 0;
}

std::vector<int> predict_batch(const BigNnModel& model, const PointMatrix& queries,
                               int threads, PhaseTiming* timing) {
    if (model.local_indices.empty()) throw std::invalid_argument("predict_batch: empty model");
    const size_t s = model.local_indices.size();
    const Eigen::Index q = queries.rows();
    if (q > 0 && queries.cols() != model.dim())
        throw std::invalid_argument("predict_batch: query dimension mismatch");

    // votes[j] holds subsample j's decisions for every query; each worker
    // owns one subsample so timing reflects one machine's full query load.
    std::vector<std::vector<int>> votes(s);
    std::vector<double> worker_ms(s, 0.0);
    parallel_for(s, threads, [&](size_t j) {
        const auto tj = Clock::now();
        auto& out = votes[j];
        out.resize(static_cast<size_t>(q));
        const KnnIndex& index = model.local_indices[j];
        for (Eigen::Index i = 0; i < q; ++i)
            out[static_cast<size_t>(i)] = predict_local(index, model.k_local, queries.row(i).transpose());
        worker_ms[j] = ms_since(tj);
    });

    const auto ta = Clock::now();
    std::vector<int> result(static_cast<size_t>(q), 0);
    for (Eigen::Index i = 0; i < q; ++i) {
        long long ones = 0;
        for (size_t j = 0; j < s; ++j) ones += votes[j][static_cast<size_t>(i)];
        result[static_cast<size_t>(i)] = 2 * ones > static_cast<long long>(s) ? 1 : 0;
    }
    if (timing) {
        timing->per_worker_ms = std::move(worker_ms);
        timing->coordination_ms = ms_since(ta);
    }
    return result;
}

int tune_k_cv(const Dataset& dataset, int folds, const std::vector<int>& k_grid, RngStream& rng,
              std::vector<int>* fold_assignment) {
    dataset.validate();
    if (folds < 2) throw std::invalid_argument("tune_k_cv: folds must be >= 2");
    if (folds > dataset.size()) throw std::invalid_argument("tune_k_cv: more folds than points");
    if (k_grid.empty()) throw std::invalid_argument("tune_k_cv: empty k grid");
    int max_k = 0;
    for (int k : k_grid) {
        if (k < 1) throw std::invalid_argument("tune_k_cv: k must be >= 1");
        max_k = std::max(max_k, k);
    }

    // Stratified fold assignment: shuffle within each label class, then
    // deal round-robin so class balance is preserved per fold.
    const Eigen::Index N = dataset.size();
    std::vector<int> fold_of(static_cast<size_t>(N), 0);
    for (int label = 0; label <= 1; ++label) {
        std::vector<int> members;
        for (Eigen::Index i = 0; i < N; ++i)
            if (dataset.labels[i] == label) members.push_back(static_cast<int>(i));
        rng.shuffle(members);
        for (size_t pos = 0; pos < members.size(); ++pos)
            fold_of[static_cast<size_t>(members[pos])] = static_cast<int>(pos % static_cast<size_t>(folds));
    }
    if (fold_assignment) *fold_assignment = fold_of;

    std::vector<double> mean_error(k_grid.size(), 0.0);
    for (int f = 0; f < folds; ++f) {
        std::vector<int> train_rows, val_rows;
        for (Eigen::Index i = 0; i < N; ++i)
            (fold_of[static_cast<size_t>(i)] == f ? val_rows : train_rows).push_back(static_cast<int>(i));
        if (val_rows.empty()) continue;
        if (static_cast<int>(train_rows.size()) < max_k)
            throw std::invalid_argument("tune_k_cv: max k exceeds training fold size " +
                                        std::to_string(train_rows.size()));

        PointMatrix pts(static_cast<Eigen::Index>(train_rows.size()), dataset.dim());
        Eigen::VectorXi labels(static_cast<Eigen::Index>(train_rows.size()));
        for (size_t r = 0; r < train_rows.size(); ++r) {
            pts.row(static_cast<Eigen::Index>(r)) = dataset.features.row(train_rows[r]);
            labels[static_cast<Eigen::Index>(r)] = dataset.labels[train_rows[r]];
        }
        const KnnIndex index = KnnIndex::build(pts, labels);

        // One max-k query per validation point; every grid k reads a prefix
        // of the sorted neighbor list.
        std::vector<long long> errors(k_grid.size(), 0);
        for (int row : val_rows) {
            const NeighborSet neighbors = index.query(dataset.features.row(row).transpose(), max_k);
            for (size_t g = 0; g < k_grid.size(); ++g) {
                const int k = k_grid[g];
                long long ones = 0;
                for (int e = 0; e < k; ++e) ones += neighbors.entries[static_cast<size_t>(e)].label;
                const int pred = 2 * ones > static_cast<long long>(k) ? 1 : 0;
                errors[g] += pred != dataset.labels[row];
            }
        }
        for (size_t g = 0; g < k_grid.size(); ++g)
            mean_error[g] += static_cast<double>(errors[g]) / static_cast<double>(val_rows.size());
    }

    size_t best = 0;
    for (size_t g = 1; g < k_grid.size(); ++g) {
        if (mean_error[g] < mean_error[best] ||
            (mean_error[g] == mean_error[best] && k_grid[g] < k_grid[best]))
            best = g;
    }
    return k_grid[best];
}

}  // namespace bignn
