#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bignn/gaussian.hpp"
#include "bignn/io.hpp"
#include "bignn/metrics.hpp"

namespace bignn {

enum class ExperimentKind { Sim1, Sim2, DenoiseBench, Real };

const char* kind_name(ExperimentKind kind);

// Fully resolved experiment description. Presets carry the published grids;
// a JSON config can overlay any field.
struct ExperimentSpec {
    ExperimentKind kind = ExperimentKind::Sim1;
    std::string preset_name;

    GaussianClassModel model;   // synthetic kinds
    RealDataset dataset;        // real kind

    std::vector<long long> N_grid;
    std::vector<double> gamma_grid;
    std::vector<double> theta_grid;  // denoise-bench
    std::vector<int> I_grid;         // denoise-bench
    std::vector<int> k_grid;         // real: CV candidates

    int fixed_k = 5;                 // sim2
    bool has_alpha = true;
    double alpha = 0.2;
    double beta = 1.0;               // reporting only: target slopes
    double k_o = 1.0;
    double K_exponent = 0.7;
    double k_o_star = 1.351284;

    int replications = 100;
    uint64_t master_seed = 1;
    long long test_size = 1000;      // synthetic kinds; real uses min(1000, N/5)
    int cv_folds = 5;
    int threads = 1;
    bool denoise_reuse_partition = false;
    long long bayes_mc_samples = 1000000;
    std::string out_path = "results.csv";
};

// Named defaults: sim1, sim2, sim3 (alias denoise-bench), real, and -desk
// variants sized for minutes, not hours.
ExperimentSpec preset_spec(const std::string& name);

// Overlays JSON onto `base` (or onto the preset the JSON itself names).
ExperimentSpec spec_from_json_text(const std::string& text, const ExperimentSpec* base = nullptr);

// Total up-front validation: grids, parameter ranges, and per-cell
// feasibility of the local neighbor count.
void validate_spec(const ExperimentSpec& spec);

std::vector<ResultRow> run_sim1(const ExperimentSpec& spec);
std::vector<ResultRow> run_sim2(const ExperimentSpec& spec);
std::vector<ResultRow> run_denoise_bench(const ExperimentSpec& spec);
std::vector<ResultRow> run_real(const ExperimentSpec& spec);
std::vector<ResultRow> run_experiment(const ExperimentSpec& spec);

// Per-N slope of log mean regret against gamma, with the rank statistics
// used to judge monotonicity.
std::vector<Sim2SlopeRow> sim2_slopes(const std::vector<ResultRow>& rows);

// Mean regret (or CIS) per (gamma, N) cell, NaN cells dropped. Per-rep
// values are too noisy to log-transform; rates are fit on these means.
std::vector<RateRow> cell_means(const std::vector<ResultRow>& rows, bool use_cis);

}  // namespace bignn
