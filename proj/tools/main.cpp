#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <CLI11.hpp>

#include "bignn/classifier.hpp"
#include "bignn/denoise.hpp"
#include "bignn/errors.hpp"
#include "bignn/experiments.hpp"
#include "bignn/io.hpp"
#include "bignn/metrics.hpp"
#include "bignn/serialize.hpp"

namespace {

using namespace bignn;

std::string path_stem(const std::string& path) {
    const size_t slash = path.find_last_of("/\\");
    const size_t dot = path.find_last_of('.');
    if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) return path;
    return path.substr(0, dot);
}

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct CommonOpts {
    std::string config;
    std::string out;
    uint64_t seed = 0;
    int threads = 0;
    std::string preset;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--config", o.config, "JSON config overlaying the preset");
    cmd->add_option("--seed", o.seed, "master seed");
    cmd->add_option("--out", o.out, "results CSV path");
    cmd->add_option("--threads", o.threads, "worker threads");
    cmd->add_option("--preset", o.preset, "named preset, e.g. sim1 or sim1-desk");
}

ExperimentSpec resolve_spec(ExperimentKind kind, const std::string& default_preset,
                            const CLI::App* cmd, const CommonOpts& o) {
    ExperimentSpec spec = preset_spec(o.preset.empty() ? default_preset : o.preset);
    if (!o.config.empty()) spec = spec_from_json_text(read_file(o.config), &spec);
    if (spec.kind != kind)
        throw ConfigError(std::string("config kind '") + kind_name(spec.kind) +
                          "' does not match subcommand '" + kind_name(kind) + "'");
    if (cmd->count("--seed")) spec.master_seed = o.seed;
    if (cmd->count("--out")) spec.out_path = o.out;
    if (cmd->count("--threads")) {
        if (o.threads < 1) throw ConfigError("--threads must be >= 1");
        spec.threads = o.threads;
    }
    return spec;
}

void print_rate_summaries(const std::vector<ResultRow>& rows) {
    for (const bool use_cis : {false, true}) {
        const char* kind = use_cis ? "cis" : "regret";
        try {
            const RateFit fit = fit_rate(cell_means(rows, use_cis));
            std::cout << kind << " slope " << format_double(fit.slope) << " (stderr "
                      << format_double(fit.slope_stderr) << ", corr "
                      << format_double(fit.correlation) << ")\n";
        } catch (const DataError& e) {
            std::cout << kind << " rate fit skipped: " << e.what() << "\n";
        }
    }
}

void print_sim2_slopes(const std::vector<Sim2SlopeRow>& slopes) {
    for (const auto& s : slopes)
        std::cout << "N=" << s.N << " log-regret slope vs gamma " << format_double(s.slope)
                  << ", spearman " << format_double(s.spearman_rho) << " (one-sided p "
                  << format_double(s.p_value) << ")\n";
}

void print_denoise_summary(const std::vector<ResultRow>& rows) {
    // (gamma, method rank, theta, I) -> regret sum, predict_ms sum, count
    std::map<std::tuple<double, int, double, long long>, std::array<double, 3>> acc;
    for (const auto& r : rows) {
        const double tkey = std::isnan(r.theta) ? -1.0 : r.theta;
        auto& a = acc[{r.gamma, r.method == "bignn" ? 0 : 1, tkey, r.I}];
        a[0] += r.regret;
        a[1] += r.predict_ms;
        a[2] += 1;
    }
    for (const auto& [key, a] : acc) {
        const auto& [gamma, rank, theta, I] = key;
        std::cout << "gamma " << format_double(gamma);
        if (rank == 0)
            std::cout << " ensemble: ";
        else
            std::cout << " theta " << format_double(theta) << " I " << I << ": ";
        std::cout << "mean regret " << format_double(a[0] / a[2]) << ", mean predict "
                  << format_double(a[1] / a[2]) << " ms\n";
    }
}

void print_speedup_summary(const std::vector<ResultRow>& rows) {
    std::map<long long, double> oracle_ms;
    for (const auto& r : rows)
        if (r.method == "oracle") oracle_ms[r.rep] = r.train_ms + r.predict_ms;
    std::map<double, std::pair<double, long long>> acc;
    for (const auto& r : rows) {
        if (r.method != "bignn") continue;
        const auto it = oracle_ms.find(r.rep);
        const double total = r.train_ms + r.predict_ms;
        if (it == oracle_ms.end() || total <= 0 || it->second <= 0) continue;
        auto& [sum, n] = acc[r.gamma];
        sum += speedup(it->second, total);
        ++n;
    }
    for (const auto& [gamma, sn] : acc)
        std::cout << "gamma " << format_double(gamma) << ": mean speedup over oracle "
                  << format_double(sn.first / static_cast<double>(sn.second)) << "x ("
                  << sn.second << " reps)\n";
}

int run_experiment_cmd(ExperimentKind kind, const std::string& default_preset,
                       const CLI::App* cmd, const CommonOpts& o) {
    const ExperimentSpec spec = resolve_spec(kind, default_preset, cmd, o);
    const std::vector<ResultRow> rows = run_experiment(spec);
    write_results_csv(spec.out_path, rows);
    std::cout << kind_name(kind) << ": wrote " << rows.size() << " rows to " << spec.out_path
              << "\n";
    switch (kind) {
        case ExperimentKind::Sim1:
            print_rate_summaries(rows);
            break;
        case ExperimentKind::Sim2: {
            const auto slopes = sim2_slopes(rows);
            const std::string spath = path_stem(spec.out_path) + "_slopes.csv";
            write_sim2_slopes_csv(spath, slopes);
            std::cout << "wrote per-N slopes to " << spath << "\n";
            print_sim2_slopes(slopes);
            break;
        }
        case ExperimentKind::DenoiseBench:
            print_denoise_summary(rows);
            break;
        case ExperimentKind::Real:
            print_speedup_summary(rows);
            break;
    }
    return 0;
}

int cmd_fit_rate(const std::string& results_path, const std::string& value_kind,
                 std::string out_path) {
    std::vector<ResultRow> rows = read_results_csv(results_path);
    bool mixed = false;
    for (const auto& r : rows)
        if (r.method != rows.front().method) mixed = true;
    if (mixed) {
        std::vector<ResultRow> kept;
        for (auto& r : rows)
            if (r.method == "bignn") kept.push_back(std::move(r));
        std::cerr << "fit-rate: multiple methods present; fitting the " << kept.size()
                  << " ensemble rows\n";
        rows = std::move(kept);
    }

    std::vector<RateRow> means = cell_means(rows, value_kind == "cis");
    std::vector<RateRow> positive;
    for (const auto& m : means)
        if (m.value > 0) positive.push_back(m);
    if (positive.size() < means.size())
        std::cerr << "fit-rate: dropped " << means.size() - positive.size()
                  << " nonpositive cell means\n";

    const RateFit fit = fit_rate(positive);
    if (out_path.empty()) out_path = path_stem(results_path) + "_rate.csv";
    std::vector<RateSummaryRow> out;
    for (const auto& [gamma, intercept] : fit.intercepts) {
        RateSummaryRow r;
        r.value_kind = value_kind;
        r.slope = fit.slope;
        r.slope_stderr = fit.slope_stderr;
        r.correlation = fit.correlation;
        r.gamma = gamma;
        r.intercept = intercept;
        out.push_back(r);
    }
    write_rate_summary_csv(out_path, out);
    std::cout << value_kind << " slope " << format_double(fit.slope) << " (stderr "
              << format_double(fit.slope_stderr) << ", corr " << format_double(fit.correlation)
              << "); wrote " << out_path << "\n";
    return 0;
}

int cmd_predict(const std::string& model_path, const std::string& queries_path,
                const std::string& out_path, bool use_denoised) {
    const ModelBundle bundle = load_model(model_path);
    const PointMatrix queries = load_points_csv(queries_path);
    if (queries.cols() != bundle.model.dim())
        throw DataError(queries_path + ": dimension " + std::to_string(queries.cols()) +
                        " does not match model dimension " + std::to_string(bundle.model.dim()));
    std::vector<int> labels;
    if (use_denoised) {
        if (!bundle.denoised) throw ConfigError("model file carries no denoised stage");
        labels = predict_denoised_batch(*bundle.denoised, queries);
    } else {
        labels = predict_batch(bundle.model, queries);
    }

    std::ofstream file;
    std::ostream* os = &std::cout;
    if (!out_path.empty()) {
        file.open(out_path);
        if (!file) throw DataError("cannot write " + out_path);
        os = &file;
    }
    *os << "label\n";
    for (const int y : labels) *os << y << "\n";
    if (!out_path.empty())
        std::cout << "wrote " << labels.size() << " labels to " << out_path << "\n";
    return 0;
}

struct TrainOpts {
    std::string data;
    std::string out;
    double gamma = 0.0;
    int k = 0;
    double alpha = 0.2;
    double k_o = 1.0;
    double theta = 0.0;
    int I = 9;
    uint64_t seed = 1;
};

int cmd_train(const TrainOpts& o) {
    RealDataset schema;
    schema.path = o.data;
    const Dataset data = load_csv(o.data, schema);
    RngStream rng(o.seed, "train-cli");
    const KRule rule = o.k > 0 ? KRule::fixed(o.k) : KRule::theorem(o.alpha, o.k_o);
    const BigNnModel model = train(data, o.gamma, rule, rng);
    std::optional<DenoisedModel> denoised;
    if (o.theta > 0) {
        RngStream pre = rng.fork("pretrain");
        denoised = pretrain(model, data, o.theta, o.I, pre);
    }
    save_model(o.out, model, denoised ? &*denoised : nullptr);
    std::cout << "trained on " << data.size() << " points: s=" << model.s()
              << " k_local=" << model.k_local;
    if (denoised) std::cout << " denoised m=" << denoised->m << " I=" << denoised->I;
    std::cout << "; wrote " << o.out << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Divide-and-conquer nearest neighbor classification toolkit"};
    app.require_subcommand(1);

    CommonOpts sim1_o, sim2_o, dn_o, real_o;
    CLI::App* sim1_cmd = app.add_subcommand("sim1", "Tuned-k rate experiment (Gaussian model)");
    add_common(sim1_cmd, sim1_o);
    CLI::App* sim2_cmd = app.add_subcommand("sim2", "Fixed-k regret decay across gamma");
    add_common(sim2_cmd, sim2_o);
    CLI::App* dn_cmd = app.add_subcommand("denoise-bench", "Denoised-ensemble accuracy/speed sweep");
    dn_cmd->alias("sim3");
    add_common(dn_cmd, dn_o);
    CLI::App* real_cmd = app.add_subcommand("real", "Benchmark on a labeled CSV dataset");
    add_common(real_cmd, real_o);

    std::string fr_results, fr_value = "regret", fr_out;
    CLI::App* fr_cmd = app.add_subcommand("fit-rate", "Fit the shared log-N rate to a results CSV");
    fr_cmd->add_option("results", fr_results, "results CSV path")->required();
    fr_cmd->add_option("--value", fr_value, "column to fit: regret or cis")
        ->check(CLI::IsMember({"regret", "cis"}));
    fr_cmd->add_option("--out", fr_out, "rate summary CSV path");

    std::string pr_model, pr_queries, pr_out;
    bool pr_denoised = false;
    CLI::App* pr_cmd = app.add_subcommand("predict", "Classify query points with a saved model");
    pr_cmd->add_option("model", pr_model, "serialized model path")->required();
    pr_cmd->add_option("queries", pr_queries, "CSV of query feature rows")->required();
    pr_cmd->add_option("--out", pr_out, "output CSV path (default stdout)");
    pr_cmd->add_flag("--denoised", pr_denoised, "use the denoised stage if present");

    TrainOpts tr;
    CLI::App* tr_cmd = app.add_subcommand("train", "Train on a labeled CSV and save the model");
    tr_cmd->add_option("data", tr.data, "labeled CSV (label in last column)")->required();
    tr_cmd->add_option("--out", tr.out, "model output path")->required();
    tr_cmd->add_option("--gamma", tr.gamma, "split coefficient in [0,1)")->required();
    tr_cmd->add_option("--k", tr.k, "fixed per-subsample k (0 = choose by rule)");
    tr_cmd->add_option("--alpha", tr.alpha, "smoothness used by the k rule");
    tr_cmd->add_option("--k-o", tr.k_o, "k rule constant");
    tr_cmd->add_option("--theta", tr.theta, "attach a denoised stage with m = N^theta");
    tr_cmd->add_option("--I", tr.I, "denoised subsample count");
    tr_cmd->add_option("--seed", tr.seed, "master seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (sim1_cmd->parsed()) return run_experiment_cmd(ExperimentKind::Sim1, "sim1", sim1_cmd, sim1_o);
        if (sim2_cmd->parsed()) return run_experiment_cmd(ExperimentKind::Sim2, "sim2", sim2_cmd, sim2_o);
        if (dn_cmd->parsed())
            return run_experiment_cmd(ExperimentKind::DenoiseBench, "denoise-bench", dn_cmd, dn_o);
        if (real_cmd->parsed()) return run_experiment_cmd(ExperimentKind::Real, "real", real_cmd, real_o);
        if (fr_cmd->parsed()) return cmd_fit_rate(fr_results, fr_value, fr_out);
        if (pr_cmd->parsed()) return cmd_predict(pr_model, pr_queries, pr_out, pr_denoised);
        if (tr_cmd->parsed()) return cmd_train(tr);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
