#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>
#include <string>

#include "loclin/dataset.hpp"

using namespace loclin;

namespace {

/// Writes `content` to a throwaway file in the test working directory and
/// removes it on scope exit.
struct TempFile {
    std::string path;
    TempFile(const std::string& name, const std::string& content) : path(name) {
        std::ofstream out(path, std::ios::binary);
        out << content;
    }
    ~TempFile() { std::remove(path.c_str()); }
};

FeatureSchema numeric_schema(std::vector<std::string> names, std::string target) {
    std::vector<FeatureSpec> specs;
    for (auto& n : names) specs.push_back({std::move(n), FeatureKind::Numeric});
    return FeatureSchema(std::move(specs), std::move(target));
}

}  // namespace

TEST_CASE("standardization uses population std") {
    // column {10,20,30} maps to {-1.2247, 0, 1.2247}
    std::vector<DataPoint> rows = {{{10.0}, {}, {}}, {{20.0}, {}, {}}, {{30.0}, {}, {}}};
    Dataset ds(numeric_schema({"x"}, "y"), rows, {1.0, 2.0, 3.0});

    CHECK(ds.row(0).numeric[0] == Catch::Approx(-1.2247).margin(1e-4));
    CHECK(ds.row(1).numeric[0] == Catch::Approx(0.0).margin(1e-12));
    CHECK(ds.row(2).numeric[0] == Catch::Approx(1.2247).margin(1e-4));
    CHECK(ds.standardization()[0].mean == Catch::Approx(20.0));
    CHECK(ds.standardization()[0].stddev == Catch::Approx(std::sqrt(200.0 / 3.0)));
}

TEST_CASE("zero-variance column standardizes to zeros and records stddev 0") {
    std::vector<DataPoint> rows = {{{7.0, 1.0}, {}, {}}, {{7.0, 2.0}, {}, {}}};
    Dataset ds(numeric_schema({"c", "x"}, "y"), rows, {0.0, 1.0});
    CHECK(ds.row(0).numeric[0] == 0.0);
    CHECK(ds.row(1).numeric[0] == 0.0);
    CHECK(ds.standardization()[0].stddev == 0.0);
    CHECK(ds.standardization()[0].mean == 7.0);
}

TEST_CASE("standardize and destandardize round-trip") {
    std::vector<DataPoint> rows = {{{10.0}, {}, {}}, {{20.0}, {}, {}}, {{30.0}, {}, {}}};
    Dataset ds(numeric_schema({"x"}, "y"), rows, {1.0, 2.0, 3.0});
    for (double raw : {-3.5, 0.0, 17.25, 1e6}) {
        double z = ds.standardize_value(0, raw);
        CHECK(ds.destandardize_value(0, z) == Catch::Approx(raw).margin(1e-9));
    }
}

TEST_CASE("dataset constructor validates shape") {
    auto schema = numeric_schema({"x"}, "y");
    SECTION("empty") {
        CHECK_THROWS_WITH(Dataset(schema, {}, {}), Catch::Matchers::ContainsSubstring("empty"));
    }
    SECTION("row/target mismatch") {
        std::vector<DataPoint> rows = {{{1.0}, {}, {}}};
        CHECK_THROWS_AS(Dataset(schema, rows, {1.0, 2.0}), std::invalid_argument);
    }
    SECTION("arity mismatch") {
        std::vector<DataPoint> rows = {{{1.0, 2.0}, {}, {}}};
        CHECK_THROWS_AS(Dataset(schema, rows, {1.0}), std::invalid_argument);
    }
    SECTION("binary outside 0/1") {
        FeatureSchema bs({{"b", FeatureKind::Binary}}, "y");
        std::vector<DataPoint> rows = {{{}, {}, {2}}};
        CHECK_THROWS_AS(Dataset(bs, rows, {1.0}), std::invalid_argument);
    }
}

TEST_CASE("csv loading with explicit schema") {
    TempFile f("dataset_test_basic.csv",
               "x,color,flag,y\n"
               "1.5,red,0,10\n"
               "2.5,blue,1,20\n"
               "3.5,red,1,30\n");
    FeatureSchema schema({{"x", FeatureKind::Numeric},
                          {"color", FeatureKind::Categorical},
                          {"flag", FeatureKind::Binary}},
                         "y");
    Dataset ds = load_csv(f.path, schema);
    REQUIRE(ds.size() == 3);
    CHECK(ds.targets() == std::vector<double>{10.0, 20.0, 30.0});
    CHECK(ds.row(1).categorical[0] == "blue");
    CHECK(ds.row(2).binary[0] == 1);
    CHECK(ds.categories(0) == std::vector<std::string>{"red", "blue"});
    CHECK(ds.category_index(0, "blue").value() == 1);
    CHECK_FALSE(ds.category_index(0, "green").has_value());
}

TEST_CASE("csv quoting rules") {
    TempFile f("dataset_test_quotes.csv",
               "x,note,y\r\n"
               "1,\"a, plain\",5\r\n"
               "2,\"he said \"\"hi\"\"\",6\r\n"
               "3,\"two\nlines\",7\r\n");
    FeatureSchema schema({{"x", FeatureKind::Numeric}, {"note", FeatureKind::Categorical}}, "y");
    Dataset ds = load_csv(f.path, schema);
    REQUIRE(ds.size() == 3);
    CHECK(ds.row(0).categorical[0] == "a, plain");
    CHECK(ds.row(1).categorical[0] == "he said \"hi\"");
    CHECK(ds.row(2).categorical[0] == "two\nlines");
}

TEST_CASE("csv error paths") {
    FeatureSchema schema({{"x", FeatureKind::Numeric}}, "y");
    SECTION("missing file") {
        CHECK_THROWS_WITH(load_csv("no_such_file_here.csv", schema),
                          Catch::Matchers::ContainsSubstring("cannot open"));
    }
    SECTION("empty file") {
        TempFile f("dataset_test_empty.csv", "");
        CHECK_THROWS_WITH(load_csv(f.path, schema),
                          Catch::Matchers::ContainsSubstring("empty"));
    }
    SECTION("header only") {
        TempFile f("dataset_test_header.csv", "x,y\n");
        CHECK_THROWS_WITH(load_csv(f.path, schema),
                          Catch::Matchers::ContainsSubstring("no data rows"));
    }
    SECTION("ragged row") {
        TempFile f("dataset_test_ragged.csv", "x,y\n1,2\n3\n");
        CHECK_THROWS_WITH(load_csv(f.path, schema),
                          Catch::Matchers::ContainsSubstring("malformed"));
    }
    SECTION("missing cell") {
        TempFile f("dataset_test_missing.csv", "x,y\n,2\n");
        CHECK_THROWS_WITH(load_csv(f.path, schema),
                          Catch::Matchers::ContainsSubstring("missing value"));
    }
    SECTION("unparsable numeric") {
        TempFile f("dataset_test_nan.csv", "x,y\nabc,2\n");
        CHECK_THROWS_WITH(load_csv(f.path, schema),
                          Catch::Matchers::ContainsSubstring("unparsable numeric"));
    }
    SECTION("unknown target") {
        TempFile f("dataset_test_tgt.csv", "x,z\n1,2\n");
        CHECK_THROWS_WITH(load_csv(f.path, schema),
                          Catch::Matchers::ContainsSubstring("unknown target"));
    }
    SECTION("unknown feature column") {
        TempFile f("dataset_test_feat.csv", "q,y\n1,2\n");
        CHECK_THROWS_WITH(load_csv(f.path, schema),
                          Catch::Matchers::ContainsSubstring("not found"));
    }
    SECTION("unterminated quote") {
        TempFile f("dataset_test_quote.csv", "x,y\n\"1,2\n");
        CHECK_THROWS_WITH(load_csv(f.path, schema),
                          Catch::Matchers::ContainsSubstring("unterminated quote"));
    }
}

TEST_CASE("kind inference: binary beats numeric, numeric beats categorical") {
    TempFile f("dataset_test_infer.csv",
               "a,b,c,y\n"
               "0,1.5,red,1\n"
               "1,2.5,blue,2\n"
               "0,3.5,3,3\n");
    Dataset ds = load_csv(f.path, "y");
    const auto& feats = ds.schema().features();
    REQUIRE(feats.size() == 3);
    CHECK(feats[0].name == "a");
    CHECK(feats[0].kind == FeatureKind::Binary);
    CHECK(feats[1].kind == FeatureKind::Numeric);
    CHECK(feats[2].kind == FeatureKind::Categorical);  // mixed digits and labels
    CHECK(ds.row(2).categorical[0] == "3");
}

TEST_CASE("inference treats constant 0 column as numeric, not binary") {
    TempFile f("dataset_test_const.csv", "a,y\n0,1\n0,2\n");
    Dataset ds = load_csv(f.path, "y");
    CHECK(ds.schema().features()[0].kind == FeatureKind::Numeric);
}

TEST_CASE("schema file loading") {
    TempFile f("dataset_test_schema.json",
               R"({"target":"y","features":[{"name":"x","kind":"numeric"},)"
               R"({"name":"c","kind":"categorical"},{"name":"b","kind":"binary"}]})");
    FeatureSchema s = load_schema(f.path);
    CHECK(s.target() == "y");
    REQUIRE(s.size() == 3);
    CHECK(s.features()[1].kind == FeatureKind::Categorical);

    TempFile bad("dataset_test_schema_bad.json", R"({"features":[]})");
    CHECK_THROWS_WITH(load_schema(bad.path), Catch::Matchers::ContainsSubstring("target"));
}

TEST_CASE("one-hot encoding layout and origins") {
    TempFile f("dataset_test_enc.csv",
               "x,color,flag,y\n"
               "10,red,0,1\n"
               "20,blue,1,2\n"
               "30,red,1,3\n");
    FeatureSchema schema({{"x", FeatureKind::Numeric},
                          {"color", FeatureKind::Categorical},
                          {"flag", FeatureKind::Binary}},
                         "y");
    Dataset ds = load_csv(f.path, schema);
    EncodedMatrix m = encode(ds);

    REQUIRE(m.column_names ==
            std::vector<std::string>{"x", "color=red", "color=blue", "flag"});
    REQUIRE(m.origin == std::vector<std::size_t>{0, 1, 1, 2});
    REQUIRE(m.values.rows() == 3);
    REQUIRE(m.values.cols() == 4);

    // numerics are standardized, one-hots and binaries are raw indicators
    CHECK(m.values(0, 0) == Catch::Approx(-1.2247).margin(1e-4));
    CHECK(m.values(0, 1) == 1.0);
    CHECK(m.values(0, 2) == 0.0);
    CHECK(m.values(1, 2) == 1.0);
    CHECK(m.values(2, 3) == 1.0);

    for (std::size_t r = 0; r < ds.size(); ++r) {
        Eigen::RowVectorXd row = encode_point(ds, ds.row(r));
        CHECK((row - m.values.row(static_cast<Eigen::Index>(r))).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("encode is deterministic across calls") {
    TempFile f("dataset_test_det.csv", "x,c,y\n1,u,1\n2,v,2\n3,u,3\n");
    FeatureSchema schema({{"x", FeatureKind::Numeric}, {"c", FeatureKind::Categorical}}, "y");
    Dataset a = load_csv(f.path, schema);
    Dataset b = load_csv(f.path, schema);
    EncodedMatrix ma = encode(a);
    EncodedMatrix mb = encode(b);
    CHECK(ma.column_names == mb.column_names);
    CHECK(ma.values == mb.values);
}

TEST_CASE("validate_point rejects unseen labels and bad arity") {
    TempFile f("dataset_test_val.csv", "x,c,y\n1,u,1\n2,v,2\n");
    FeatureSchema schema({{"x", FeatureKind::Numeric}, {"c", FeatureKind::Categorical}}, "y");
    Dataset ds = load_csv(f.path, schema);

    DataPoint ok{{0.0}, {"u"}, {}};
    CHECK_NOTHROW(ds.validate_point(ok));

    DataPoint unseen{{0.0}, {"w"}, {}};
    CHECK_THROWS_WITH(ds.validate_point(unseen),
                      Catch::Matchers::ContainsSubstring("unseen label"));

    DataPoint short_point{{}, {"u"}, {}};
    CHECK_THROWS_AS(ds.validate_point(short_point), std::invalid_argument);
}
