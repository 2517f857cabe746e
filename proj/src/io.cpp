#include "bignn/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "bignn/errors.hpp"
#include "bignn/rng.hpp"

namespace bignn {

namespace {

std::string trim(const std::string& s) {
    size_t b = 0, e = s.size();
    while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
    return s.substr(b, e - b);
}

std::vector<std::string> split(const std::string& line, char delimiter) {
    std::vector<std::string> out;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, delimiter)) out.push_back(trim(cell));
    if (!line.empty() && line.back() == delimiter) out.emplace_back();
    return out;
}

bool parse_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    const char* begin = s.data();
    const char* end = begin + s.size();
    const auto res = std::from_chars(begin, end, out);
    return res.ec == std::errc() && res.ptr == end;
}

bool parse_ll(const std::string& s, long long& out) {
    if (s.empty()) return false;
    const char* begin = s.data();
    const char* end = begin + s.size();
    const auto res = std::from_chars(begin, end, out);
    return res.ec == std::errc() && res.ptr == end;
}

bool parse_u64(const std::string& s, uint64_t& out) {
    if (s.empty()) return false;
    const char* begin = s.data();
    const char* end = begin + s.size();
    const auto res = std::from_chars(begin, end, out);
    return res.ec == std::errc() && res.ptr == end;
}

std::vector<std::vector<std::string>> read_table(const std::string& path, char delimiter,
                                                 std::vector<int>* line_numbers) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot open " + path);
    std::vector<std::vector<std::string>> rows;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty()) continue;
        rows.push_back(split(t, delimiter));
        if (line_numbers) line_numbers->push_back(lineno);
    }
    return rows;
}

}  // namespace

Dataset load_csv(const std::string& path, const RealDataset& schema) {
    std::vector<int> line_of;
    const auto rows = read_table(path, schema.delimiter, &line_of);
    if (rows.empty()) throw DataError(path + ": no data rows");

    const int width = static_cast<int>(rows.front().size());
    const int label_col = schema.label_column < 0 ? width - 1 : schema.label_column;
    if (label_col < 0 || label_col >= width)
        throw DataError(path + ": label column " + std::to_string(label_col) + " out of range");

    std::vector<int> feature_cols = schema.feature_columns;
    if (feature_cols.empty()) {
        for (int c = 0; c < width; ++c)
            if (c != label_col) feature_cols.push_back(c);
    }
    for (int c : feature_cols)
        if (c < 0 || c >= width)
            throw DataError(path + ": feature column " + std::to_string(c) + " out of range");
    if (feature_cols.empty()) throw DataError(path + ": no feature columns");

    // Header detection: a first row with any cell that neither parses as a
    // number nor matches the label map is a header.
    size_t first_data = 0;
    if (schema.has_header == 1) {
        first_data = 1;
    } else if (schema.has_header == -1) {
        for (const auto& cell : rows.front()) {
            double v;
            if (!parse_double(cell, v) && !schema.label_map.count(cell)) {
                first_data = 1;
                break;
            }
        }
    }
    if (first_data >= rows.size()) throw DataError(path + ": no data rows after header");

    const size_t n = rows.size() - first_data;
    PointMatrix features(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(feature_cols.size()));
    Eigen::VectorXi labels(static_cast<Eigen::Index>(n));

    for (size_t r = first_data; r < rows.size(); ++r) {
        const auto& cells = rows[r];
        const int lineno = line_of[r];
        if (static_cast<int>(cells.size()) != width)
            throw DataError(path + ": row " + std::to_string(lineno) + " has " +
                            std::to_string(cells.size()) + " columns, expected " +
                            std::to_string(width));
        const size_t i = r - first_data;
        for (size_t f = 0; f < feature_cols.size(); ++f) {
            double v;
            if (!parse_double(cells[static_cast<size_t>(feature_cols[f])], v))
                throw DataError(path + ": row " + std::to_string(lineno) + " column " +
                                std::to_string(feature_cols[f] + 1) + ": cannot parse '" +
                                cells[static_cast<size_t>(feature_cols[f])] + "'");
            features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(f)) = v;
        }
        const std::string& cell = cells[static_cast<size_t>(label_col)];
        int y;
        const auto it = schema.label_map.find(cell);
        if (it != schema.label_map.end()) {
            y = it->second;
        } else {
            double v;
            if (!parse_double(cell, v))
                throw DataError(path + ": row " + std::to_string(lineno) + " column " +
                                std::to_string(label_col + 1) + ": cannot parse label '" + cell + "'");
            y = static_cast<int>(v);
            if (static_cast<double>(y) != v) y = -1;
        }
        if (y != 0 && y != 1)
            throw DataError(path + ": row " + std::to_string(lineno) +
                            ": label '" + cell + "' does not map to {0,1}");
        labels[static_cast<Eigen::Index>(i)] = y;
    }

    if (schema.expected_rows >= 0 && static_cast<long long>(n) != schema.expected_rows)
        throw DataError(path + ": expected " + std::to_string(schema.expected_rows) +
                        " rows, found " + std::to_string(n));
    if (schema.expected_dim >= 0 && static_cast<int>(feature_cols.size()) != schema.expected_dim)
        throw DataError(path + ": expected dimension " + std::to_string(schema.expected_dim) +
                        ", found " + std::to_string(feature_cols.size()));

    return Dataset(std::move(features), std::move(labels));
}

PointMatrix load_points_csv(const std::string& path, char delimiter, int has_header) {
    std::vector<int> line_of;
    const auto rows = read_table(path, delimiter, &line_of);
    if (rows.empty()) throw DataError(path + ": no rows");

    size_t first_data = 0;
    if (has_header == 1) {
        first_data = 1;
    } else if (has_header == -1) {
        for (const auto& cell : rows[0]) {
            double v;
            if (!parse_double(cell, v)) {
                first_data = 1;
                break;
            }
        }
    }
    if (first_data >= rows.size()) throw DataError(path + ": no data rows after header");

    const size_t n = rows.size() - first_data;
    const size_t width = rows[first_data].size();
    PointMatrix pts(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(width));
    for (size_t r = first_data; r < rows.size(); ++r) {
        const auto& cells = rows[r];
        const int lineno = line_of[r];
        if (cells.size() != width)
            throw DataError(path + ": row " + std::to_string(lineno) + " has " +
                            std::to_string(cells.size()) + " columns, expected " +
                            std::to_string(width));
        for (size_t c = 0; c < width; ++c) {
            double v;
            if (!parse_double(cells[c], v))
                throw DataError(path + ": row " + std::to_string(lineno) + " column " +
                                std::to_string(c + 1) + ": cannot parse '" + cells[c] + "'");
            pts(static_cast<Eigen::Index>(r - first_data), static_cast<Eigen::Index>(c)) = v;
        }
    }
    return pts;
}

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

namespace {

constexpr const char* kResultsHeader =
    "method,N,gamma,theta,I,k,rep,risk,regret,cis,train_ms,predict_ms,seed";

std::string row_to_csv(const ResultRow& r) {
    std::string out;
    out += r.method;
    out += ',';
    out += std::to_string(r.N);
    out += ',';
    out += format_double(r.gamma);
    out += ',';
    out += format_double(r.theta);
    out += ',';
    out += std::to_string(r.I);
    out += ',';
    out += std::to_string(r.k);
    out += ',';
    out += std::to_string(r.rep);
    out += ',';
    out += format_double(r.risk);
    out += ',';
    out += format_double(r.regret);
    out += ',';
    out += format_double(r.cis);
    out += ',';
    out += format_double(r.train_ms);
    out += ',';
    out += format_double(r.predict_ms);
    out += ',';
    out += std::to_string(r.seed);
    return out;
}

}  // namespace

void write_results_csv(const std::string& path, const std::vector<ResultRow>& rows) {
    std::ofstream os(path);
    if (!os) throw DataError("cannot open " + path + " for writing");
    os << kResultsHeader << '\n';
    for (const auto& r : rows) os << row_to_csv(r) << '\n';
    if (!os) throw DataError("write failed for " + path);
}

std::vector<ResultRow> read_results_csv(const std::string& path) {
    const auto table = read_table(path, ',', nullptr);
    if (table.empty()) throw DataError(path + ": empty results file");
    const auto& header = table.front();
    std::map<std::string, size_t> col;
    for (size_t c = 0; c < header.size(); ++c) col[header[c]] = c;
    for (const char* name : {"method", "N", "gamma", "theta", "I", "k", "rep", "risk", "regret",
                             "cis", "train_ms", "predict_ms", "seed"})
        if (!col.count(name)) throw DataError(path + ": missing column " + name);

    std::vector<ResultRow> rows;
    rows.reserve(table.size() - 1);
    for (size_t r = 1; r < table.size(); ++r) {
        const auto& cells = table[r];
        if (cells.size() != header.size())
            throw DataError(path + ": row " + std::to_string(r + 1) + " column count mismatch");
        ResultRow row;
        row.method = cells[col["method"]];
        bool ok = parse_ll(cells[col["N"]], row.N) && parse_double(cells[col["gamma"]], row.gamma) &&
                  parse_double(cells[col["theta"]], row.theta) && parse_ll(cells[col["I"]], row.I) &&
                  parse_ll(cells[col["k"]], row.k) && parse_ll(cells[col["rep"]], row.rep) &&
                  parse_double(cells[col["risk"]], row.risk) &&
                  parse_double(cells[col["regret"]], row.regret) &&
                  parse_double(cells[col["cis"]], row.cis) &&
                  parse_double(cells[col["train_ms"]], row.train_ms) &&
                  parse_double(cells[col["predict_ms"]], row.predict_ms) &&
                  parse_u64(cells[col["seed"]], row.seed);
        if (!ok) throw DataError(path + ": row " + std::to_string(r + 1) + ": cannot parse");
        rows.push_back(std::move(row));
    }
    return rows;
}

uint64_t results_fingerprint(const std::vector<ResultRow>& rows) {
    std::string acc;
    for (const auto& r : rows) {
        acc += r.method;
        acc += ',';
        acc += std::to_string(r.N);
        acc += ',';
        acc += format_double(r.gamma);
        acc += ',';
        acc += format_double(r.theta);
        acc += ',';
        acc += std::to_string(r.I);
        acc += ',';
        acc += std::to_string(r.k);
        acc += ',';
        acc += std::to_string(r.rep);
        acc += ',';
        acc += format_double(r.risk);
        acc += ',';
        acc += format_double(r.regret);
        acc += ',';
        acc += format_double(r.cis);
        acc += ',';
        acc += std::to_string(r.seed);
        acc += '\n';
    }
    return detail::fnv1a64(acc);
}

void write_rate_summary_csv(const std::string& path, const std::vector<RateSummaryRow>& rows) {
    std::ofstream os(path);
    if (!os) throw DataError("cannot open " + path + " for writing");
    os << "value_kind,slope,stderr,correlation,gamma,intercept\n";
    for (const auto& r : rows) {
        os << r.value_kind << ',' << format_double(r.slope) << ',' << format_double(r.slope_stderr)
           << ',' << format_double(r.correlation) << ',' << format_double(r.gamma) << ','
           << format_double(r.intercept) << '\n';
    }
    if (!os) throw DataError("write failed for " + path);
}

void write_sim2_slopes_csv(const std::string& path, const std::vector<Sim2SlopeRow>& rows) {
    std::ofstream os(path);
    if (!os) throw DataError("cannot open " + path + " for writing");
    os << "N,slope,spearman_rho,p_value\n";
    for (const auto& r : rows) {
        os << r.N << ',' << format_double(r.slope) << ',' << format_double(r.spearman_rho) << ','
           << format_double(r.p_value) << '\n';
    }
    if (!os) throw DataError("write failed for " + path);
}

}  // namespace bignn
