#pragma once

#include <vector>

#include "bignn/dataset.hpp"
#include "bignn/knn_index.hpp"
#include "bignn/partition.hpp"
#include "bignn/rng.hpp"

namespace bignn {

// k = max(1, round(k_o * n^{2a/(2a+1)} * s^{-1/(2a+1)})).
int select_k(double alpha, long long n, long long s, double k_o);

// Simulation-3 rule: K = round(N^K_exponent), k = ceil(k_o_star * K / s).
int select_k_sim3(long long N, long long s, double K_exponent, double k_o_star);

// Oracle k split across s machines: max(1, round(k_oracle / s)).
int divide_oracle_k(int k_oracle, long long s);

// How the local neighbor count is fixed at training time.
enum class KRuleKind { Fixed, Theorem, Sim3 };

struct KRule {
    KRuleKind kind = KRuleKind::Theorem;
    int fixed_k = 1;
    double alpha = 0.2;
    double k_o = 1.0;
    double K_exponent = 0.7;
    double k_o_star = 1.351284;

    static KRule fixed(int k) {
        KRule r;
        r.kind = KRuleKind::Fixed;
        r.fixed_k = k;
        return r;
    }
    static KRule theorem(double alpha, double k_o = 1.0) {
        KRule r;
        r.kind = KRuleKind::Theorem;
        r.alpha = alpha;
        r.k_o = k_o;
        return r;
    }
    static KRule sim3(double K_exponent = 0.7, double k_o_star = 1.351284) {
        KRule r;
        r.kind = KRuleKind::Sim3;
        r.K_exponent = K_exponent;
        r.k_o_star = k_o_star;
        return r;
    }
};

// Divide-and-conquer ensemble: s local kNN classifiers joined by a strict
// majority vote. s = 1 degenerates to the oracle kNN classifier.
struct BigNnModel {
    std::vector<KnnIndex> local_indices;  // one per subsample
    int k_local = 1;
    double gamma = 0.0;
    double k_o = 1.0;
    PartitionPlan partition;

    int s() const { return static_cast<int>(local_indices.size()); }
    Eigen::Index dim() const { return local_indices.empty() ? 0 : local_indices.front().dim(); }
};

// Per-phase wall-clock of a batched operation split by subsample worker.
// distributed_ms models each worker on its own machine (slowest worker plus
// the aggregation pass); sequential_ms is the single-machine total.
struct PhaseTiming {
    std::vector<double> per_worker_ms;
    double coordination_ms = 0.0;  // partitioning or vote aggregation

    double distributed_ms() const;
    double sequential_ms() const;
};

BigNnModel train(const Dataset& dataset, double gamma, const KRule& rule, RngStream& rng,
                 IndexKind index_kind = IndexKind::KdTree, int threads = 1,
                 PhaseTiming* timing = nullptr);

// Local decision: 1 iff the mean neighbor label strictly exceeds 1/2.
int predict_local(const KnnIndex& index, int k, ConstVecRef x);

// Strict majority of binary votes; exactly half ones yields 0.
int majority_vote(const std::vector<int>& votes);

int predict(const BigNnModel& model, ConstVecRef x);

std::vector<int> predict_batch(const BigNnModel& model, const PointMatrix& queries,
                               int threads = 1, PhaseTiming* timing = nullptr);

// Stratified v-fold cross-validation over a k grid; ties go to the
// smallest k.
int tune_k_cv(const Dataset& dataset, int folds, const std::vector<int>& k_grid, RngStream& rng,
              std::vector<int>* fold_assignment = nullptr);

}  // namespace bignn
