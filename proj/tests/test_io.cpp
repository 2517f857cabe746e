#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "bignn/errors.hpp"
#include "bignn/io.hpp"

using namespace bignn;

namespace {

std::string temp_path(const std::string& name) {
    static const std::string dir = [] {
        const auto d = std::filesystem::temp_directory_path() / "bignn_io_tests";
        std::filesystem::create_directories(d);
        return d.string();
    }();
    return dir + "/" + name;
}

std::string write_file(const std::string& name, const std::string& text) {
    const std::string path = temp_path(name);
    std::ofstream os(path);
    os << text;
    return path;
}

bool same_value(double a, double b) {
    if (std::isnan(a) || std::isnan(b)) return std::isnan(a) && std::isnan(b);
    return a == b;
}

ResultRow sample_row() {
    ResultRow r;
    r.method = "bignn";
    r.N = 4000;
    r.gamma = 0.3;
    r.theta = std::nan("");
    r.I = 0;
    r.k = 3;
    r.rep = 17;
    r.risk = 0.140625;
    r.regret = 0.0087890625;
    r.cis = 0.0625;
    r.train_ms = 12.5;
    r.predict_ms = 3.25;
    r.seed = 18446744073709551615ull;
    return r;
}

}  // namespace

TEST_CASE("labeled CSV loads with and without a header") {
    const std::string body = "0.5,-1.25,1\n2,3,0\n-0.125,4.5,1\n";
    const std::string with_header = write_file("basic.csv", "x1,x2,label\n" + body);
    const std::string headerless = write_file("basic_nohdr.csv", body);

    RealDataset schema;
    for (const std::string& path : {with_header, headerless}) {
        const Dataset d = load_csv(path, schema);
        REQUIRE(d.size() == 3);
        REQUIRE(d.dim() == 2);
        CHECK(d.features(0, 0) == 0.5);
        CHECK(d.features(0, 1) == -1.25);
        CHECK(d.features(1, 0) == 2.0);
        CHECK(d.features(2, 1) == 4.5);
        CHECK(d.labels[0] == 1);
        CHECK(d.labels[1] == 0);
        CHECK(d.labels[2] == 1);
    }

    // Forcing the header setting overrides detection.
    schema.has_header = 1;
    CHECK(load_csv(headerless, schema).size() == 2);
    schema.has_header = 0;
    CHECK_THROWS_WITH_AS(load_csv(with_header, schema), doctest::Contains("row 1"), DataError);
}

TEST_CASE("parse errors name the file line and column") {
    const std::string path =
        write_file("bad_cell.csv", "x1,x2,label\n1,2,0\n3,4,1\n5,oops,0\n");
    RealDataset schema;
    CHECK_THROWS_WITH_AS(load_csv(path, schema), doctest::Contains("row 4"), DataError);
    CHECK_THROWS_WITH_AS(load_csv(path, schema), doctest::Contains("column 2"), DataError);

    const std::string ragged = write_file("ragged.csv", "1,2,0\n3,1\n");
    CHECK_THROWS_WITH_AS(load_csv(ragged, schema), doctest::Contains("expected 3"), DataError);

    CHECK_THROWS_WITH_AS(load_csv(temp_path("absent.csv"), schema),
                         doctest::Contains("cannot open"), DataError);
}

TEST_CASE("text labels map through label_map, others must be exact 0/1") {
    RealDataset schema;
    schema.label_map = {{"spam", 1}, {"ham", 0}};
    const std::string mapped = write_file("mapped.csv", "f1,cls\n0.5,spam\n1.5,ham\n");
    const Dataset d = load_csv(mapped, schema);
    CHECK(d.labels[0] == 1);
    CHECK(d.labels[1] == 0);

    RealDataset plain;
    const std::string two = write_file("label2.csv", "1.0,2\n");
    CHECK_THROWS_WITH_AS(load_csv(two, plain), doctest::Contains("does not map"), DataError);
    const std::string frac = write_file("labelhalf.csv", "1.0,0.5\n");
    CHECK_THROWS_WITH_AS(load_csv(frac, plain), doctest::Contains("does not map"), DataError);
}

TEST_CASE("column selection and shape expectations") {
    const std::string path = write_file("cols.csv", "a,b,c\n1.0,1,9.5\n2.0,0,8.5\n");
    RealDataset schema;
    schema.feature_columns = {0, 2};
    schema.label_column = 1;
    const Dataset d = load_csv(path, schema);
    REQUIRE(d.dim() == 2);
    CHECK(d.features(0, 1) == 9.5);
    CHECK(d.features(1, 0) == 2.0);
    CHECK(d.labels[0] == 1);
    CHECK(d.labels[1] == 0);

    schema.expected_rows = 5;
    CHECK_THROWS_WITH_AS(load_csv(path, schema), doctest::Contains("expected 5 rows"), DataError);
    schema.expected_rows = -1;
    schema.expected_dim = 3;
    CHECK_THROWS_WITH_AS(load_csv(path, schema), doctest::Contains("expected dimension 3"),
                         DataError);

    RealDataset bad;
    bad.label_column = 7;
    CHECK_THROWS_WITH_AS(load_csv(path, bad), doctest::Contains("out of range"), DataError);
    bad.label_column = -1;
    bad.feature_columns = {0, 9};
    CHECK_THROWS_WITH_AS(load_csv(path, bad), doctest::Contains("out of range"), DataError);
}

TEST_CASE("query-point CSV") {
    const std::string body = "0.25,1\n2,3\n-4.5,0.125\n";
    const PointMatrix with_hdr = load_points_csv(write_file("pts.csv", "q1,q2\n" + body));
    const PointMatrix no_hdr = load_points_csv(write_file("pts_nohdr.csv", body));
    REQUIRE(with_hdr.rows() == 3);
    REQUIRE(no_hdr.rows() == 3);
    CHECK((with_hdr - no_hdr).cwiseAbs().maxCoeff() == 0.0);
    CHECK(with_hdr(2, 0) == -4.5);

    CHECK(load_points_csv(write_file("pts_forced.csv", body), ',', 1).rows() == 2);

    const std::string bad = write_file("pts_bad.csv", "1,2\n3,x\n");
    CHECK_THROWS_WITH_AS(load_points_csv(bad), doctest::Contains("row 2"), DataError);
    const std::string ragged = write_file("pts_ragged.csv", "1,2\n3\n");
    CHECK_THROWS_WITH_AS(load_points_csv(ragged), doctest::Contains("columns"), DataError);
}

TEST_CASE("results CSV round-trips, including NaN fields") {
    std::vector<ResultRow> rows;
    rows.push_back(sample_row());
    rows.push_back(sample_row());
    rows[1].method = "denoised";
    rows[1].theta = 0.6;
    rows[1].I = 9;
    rows[1].regret = std::nan("");
    rows[1].cis = std::nan("");
    rows[1].seed = 0;

    const std::string path = temp_path("results.csv");
    write_results_csv(path, rows);
    const std::vector<ResultRow> back = read_results_csv(path);
    REQUIRE(back.size() == rows.size());
    for (size_t i = 0; i < rows.size(); ++i) {
        CHECK(back[i].method == rows[i].method);
        CHECK(back[i].N == rows[i].N);
        CHECK(back[i].gamma == rows[i].gamma);
        CHECK(same_value(back[i].theta, rows[i].theta));
        CHECK(back[i].I == rows[i].I);
        CHECK(back[i].k == rows[i].k);
        CHECK(back[i].rep == rows[i].rep);
        CHECK(back[i].risk == rows[i].risk);
        CHECK(same_value(back[i].regret, rows[i].regret));
        CHECK(same_value(back[i].cis, rows[i].cis));
        CHECK(back[i].train_ms == rows[i].train_ms);
        CHECK(back[i].predict_ms == rows[i].predict_ms);
        CHECK(back[i].seed == rows[i].seed);
    }
}

TEST_CASE("results reader validates its header") {
    const std::string missing = write_file(
        "results_missing.csv", "method,N,gamma,theta,I,k,rep,risk,regret,train_ms,predict_ms,seed\n");
    CHECK_THROWS_WITH_AS(read_results_csv(missing), doctest::Contains("missing column cis"),
                         DataError);
    const std::string corrupt = write_file(
        "results_corrupt.csv",
        "method,N,gamma,theta,I,k,rep,risk,regret,cis,train_ms,predict_ms,seed\n"
        "bignn,1000,0.3,nan,0,3,0,0.1,0.01,nan,1.0,1.0,zzz\n");
    CHECK_THROWS_AS(read_results_csv(corrupt), DataError);
}

TEST_CASE("fingerprint ignores timing columns only") {
    std::vector<ResultRow> rows = {sample_row(), sample_row()};
    rows[1].rep = 18;
    const uint64_t base = results_fingerprint(rows);

    std::vector<ResultRow> retimed = rows;
    retimed[0].train_ms = 999.0;
    retimed[1].predict_ms = 0.001;
    CHECK(results_fingerprint(retimed) == base);

    std::vector<ResultRow> edited = rows;
    edited[1].risk += 1e-9;
    CHECK(results_fingerprint(edited) != base);

    std::vector<ResultRow> swapped = {rows[1], rows[0]};
    CHECK(results_fingerprint(swapped) != base);
}

TEST_CASE("shortest round-trip double formatting") {
    CHECK(format_double(0.1) == "0.1");
    CHECK(format_double(2.0) == "2");
    CHECK(format_double(-0.5) == "-0.5");
    CHECK(format_double(std::nan("")) == "nan");
    const double third = 1.0 / 3.0;
    CHECK(std::stod(format_double(third)) == third);
}
