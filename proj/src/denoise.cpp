#include "bignn/denoise.hpp"

#include <algorithm>
#include <chrono>
#include <stdexcept>

#include "bignn/partition.hpp"
#include "bignn/thread_pool.hpp"

namespace bignn {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

// Adjacent training subsamples concatenated (cyclically, starting at i)
// until m points are collected; truncated to exactly m.
std::vector<int> merged_subsample(const std::vector<std::vector<int>>& groups, size_t start, int m) {
    std::vector<int> rows;
    rows.reserve(static_cast<size_t>(m));
    for (size_t step = 0; step < groups.size() && static_cast<int>(rows.size()) < m; ++step) {
        const auto& g = groups[(start + step) % groups.size()];
        for (int r : g) {
            rows.push_back(r);
            if (static_cast<int>(rows.size()) == m) break;
        }
    }
    return rows;
}

}  // namespace

DenoisedModel pretrain(const BigNnModel& model, const Dataset& dataset, double theta, int I,
                       RngStream& rng, bool reuse_partition, int threads, PhaseTiming* timing) {
    dataset.validate();
    if (!(theta > 0.0 && theta <= 1.0))
        throw std::invalid_argument("pretrain: theta must lie in (0,1]");
    if (I < 1) throw std::invalid_argument("pretrain: I must be >= 1");
    if (model.local_indices.empty()) throw std::invalid_argument("pretrain: empty model");
    if (dataset.dim() != model.dim()) throw std::invalid_argument("pretrain: dimension mismatch");

    const auto t0 = Clock::now();
    const Eigen::Index N = dataset.size();
    const int m = static_cast<int>(std::min<long long>(
        N, std::max<long long>(1, round_half_away(std::pow(static_cast<double>(N), theta)))));

    std::vector<std::vector<int>> chosen(static_cast<size_t>(I));
    if (reuse_partition) {
        const auto groups = model.partition.subsample_indices();
        for (int i = 0; i < I; ++i)
            chosen[static_cast<size_t>(i)] = merged_subsample(groups, static_cast<size_t>(i), m);
    } else {
        for (int i = 0; i < I; ++i)
            chosen[static_cast<size_t>(i)] = rng.sample_without_replacement(static_cast<int>(N), m);
    }

    // Relabel lazily: only rows that appear in some subsample get a model
    // prediction, computed once even if sampled repeatedly.
    std::vector<int> needed;
    {
        std::vector<char> seen(static_cast<size_t>(N), 0);
        for (const auto& rows : chosen)
            for (int r : rows)
                if (!seen[static_cast<size_t>(r)]) {
                    seen[static_cast<size_t>(r)] = 1;
                    needed.push_back(r);
                }
    }
    std::vector<int> relabeled(static_cast<size_t>(N), -1);
    parallel_for(needed.size(), threads, [&](size_t t) {
        const int r = needed[t];
        relabeled[static_cast<size_t>(r)] = predict(model, dataset.features.row(r).transpose());
    });
    const double relabel_ms = ms_since(t0);

    DenoisedModel out;
    out.m = m;
    out.I = I;
    out.theta = theta;
    out.relabeled_subsamples.resize(static_cast<size_t>(I));
    std::vector<double> worker_ms(static_cast<size_t>(I), 0.0);
    parallel_for(static_cast<size_t>(I), threads, [&](size_t i) {
        const auto ti = Clock::now();
        const auto& rows = chosen[i];
        PointMatrix pts(static_cast<Eigen::Index>(rows.size()), dataset.dim());
        Eigen::VectorXi labels(static_cast<Eigen::Index>(rows.size()));
        for (size_t r = 0; r < rows.size(); ++r) {
            pts.row(static_cast<Eigen::Index>(r)) = dataset.features.row(rows[r]);
            labels[static_cast<Eigen::Index>(r)] = relabeled[static_cast<size_t>(rows[r])];
        }
        out.relabeled_subsamples[i] = KnnIndex::build(pts, labels, rows);
        worker_ms[i] = ms_since(ti);
    });

    if (timing) {
        timing->per_worker_ms = std::move(worker_ms);
        timing->coordination_ms = relabel_ms;
    }
    return out;
}

int predict_denoised(const DenoisedModel& dmodel, ConstVecRef x) {
    if (dmodel.relabeled_subsamples.empty())
        throw std::invalid_argument("predict_denoised: empty model");
    long long ones = 0;
    for (const auto& index : dmodel.relabeled_subsamples) {
        const NeighborSet nn = index.query(x, 1);
        ones += nn.entries.front().label;
    }
    return 2 * ones > static_cast<long long>(dmodel.relabeled_subsamples.size()) ? 1 : 0;
}

std::vector<int> predict_denoised_batch(const DenoisedModel& dmodel, const PointMatrix& queries,
                                        int threads, PhaseTiming* timing) {
    if (dmodel.relabeled_subsamples.empty())
        throw std::invalid_argument("predict_denoised_batch: empty model");
    const size_t I = dmodel.relabeled_subsamples.size();
    const Eigen::Index q = queries.rows();
    if (q > 0 && queries.cols() != dmodel.dim())
        throw std::invalid_argument("predict_denoised_batch: query dimension mismatch");

    std::vector<std::vector<int>> votes(I);
    std::vector<double> worker_ms(I, 0.0);
    parallel_for(I, threads, [&](size_t i) {
        const auto ti = Clock::now();
        const KnnIndex& index = dmodel.relabeled_subsamples[i];
        auto& out = votes[i];
        out.resize(static_cast<size_t>(q));
        for (Eigen::Index r = 0; r < q; ++r)
            out[static_cast<size_t>(r)] = index.query(queries.row(r).transpose(), 1).entries.front().label;
        worker_ms[i] = ms_since(ti);
    });

    const auto ta = Clock::now();
    std::vector<int> result(static_cast<size_t>(q), 0);
    for (Eigen::Index r = 0; r < q; ++r) {
        long long ones = 0;
        for (size_t i = 0; i < I; ++i) ones += votes[i][static_cast<size_t>(r)];
        result[static_cast<size_t>(r)] = 2 * ones > static_cast<long long>(I) ? 1 : 0;
    }
    if (timing) {
        timing->per_worker_ms = std::move(worker_ms);
        timing->coordination_ms = ms_since(ta);
    }
    return result;
}

}  // namespace bignn
