#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "bignn/dataset.hpp"

namespace bignn {

// Declarative description of a delimited real dataset.
struct RealDataset {
    std::string name;
    std::string path;
    std::vector<int> feature_columns;       // empty: every column but the label
    int label_column = -1;                  // -1: last column
    std::map<std::string, int> label_map;   // optional text label -> {0,1}
    int has_header = -1;                    // -1 auto-detect, 0 no, 1 yes
    char delimiter = ',';
    long long expected_rows = -1;           // -1: unchecked
    int expected_dim = -1;
};

Dataset load_csv(const std::string& path, const RealDataset& schema);

// Feature-only CSV (query points): every cell numeric, optional header
// auto-detected when has_header is -1.
PointMatrix load_points_csv(const std::string& path, char delimiter = ',', int has_header = -1);

// One result record; the CSV column order is the field order here.
struct ResultRow {
    std::string method;
    long long N = 0;
    double gamma = 0.0;
    double theta = 0.0;      // nan when not applicable
    long long I = 0;         // 0 when not applicable
    long long k = 0;
    long long rep = 0;
    double risk = 0.0;
    double regret = 0.0;     // nan when the Bayes risk is unknown
    double cis = 0.0;        // nan when the replication is unpaired
    double train_ms = 0.0;
    double predict_ms = 0.0;
    uint64_t seed = 0;
};

void write_results_csv(const std::string& path, const std::vector<ResultRow>& rows);
std::vector<ResultRow> read_results_csv(const std::string& path);

// Order-sensitive FNV-1a digest of every column except the timing ones.
uint64_t results_fingerprint(const std::vector<ResultRow>& rows);

// Shortest round-trip decimal form.
std::string format_double(double v);

struct RateSummaryRow {
    std::string value_kind;  // regret | cis
    double slope = 0.0;
    double slope_stderr = 0.0;
    double correlation = 0.0;
    double gamma = 0.0;
    double intercept = 0.0;
};

void write_rate_summary_csv(const std::string& path, const std::vector<RateSummaryRow>& rows);

struct Sim2SlopeRow {
    long long N = 0;
    double slope = 0.0;         // d log(mean regret) / d gamma
    double spearman_rho = 0.0;  // over gamma grid means
    double p_value = 0.0;       // one-sided, rho < 0
};

void write_sim2_slopes_csv(const std::string& path, const std::vector<Sim2SlopeRow>& rows);

}  // namespace bignn
