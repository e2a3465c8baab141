#include <catch2/catch_amalgamated.hpp>

#include <iostream>
#include <random>

#include "loclin/surrogate.hpp"
#include "support/oracles.hpp"

using namespace loclin;

namespace {

EncodedMatrix make_matrix(const Eigen::MatrixXd& values, std::vector<std::string> names) {
    EncodedMatrix m;
    m.values = values;
    m.column_names = std::move(names);
    m.origin.resize(m.column_names.size());
    std::iota(m.origin.begin(), m.origin.end(), std::size_t{0});
    return m;
}

Eigen::MatrixXd centered_random(std::mt19937& rng, Eigen::Index n, Eigen::Index p) {
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    Eigen::MatrixXd X(n, p);
    for (Eigen::Index j = 0; j < p; ++j) {
        for (Eigen::Index i = 0; i < n; ++i) X(i, j) = u(rng);
        X.col(j).array() -= X.col(j).mean();
    }
    return X;
}

}  // namespace

TEST_CASE("fold layout is contiguous with the documented sizes") {
    auto f12 = cv_folds(12);
    REQUIRE(f12.size() == 5);
    std::vector<std::size_t> sizes;
    std::size_t expect_begin = 0;
    for (auto [b, e] : f12) {
        CHECK(b == expect_begin);
        sizes.push_back(e - b);
        expect_begin = e;
    }
    CHECK(expect_begin == 12);
    CHECK(sizes == std::vector<std::size_t>{3, 3, 2, 2, 2});

    auto f5 = cv_folds(5);
    for (auto [b, e] : f5) CHECK(e - b == 1);

    CHECK_THROWS_AS(cv_folds(4), std::invalid_argument);
}

TEST_CASE("lambda grid spans three decades geometrically") {
    auto g = lambda_grid(8.0);
    REQUIRE(g.size() == 100);
    CHECK(g.front() == 8.0);
    CHECK(g.back() == Catch::Approx(8.0e-3).epsilon(1e-12));
    CHECK(std::is_sorted(g.rbegin(), g.rend()));
    // constant ratio between consecutive points
    double ratio = g[1] / g[0];
    for (std::size_t i = 2; i < g.size(); ++i)
        CHECK(g[i] / g[i - 1] == Catch::Approx(ratio).epsilon(1e-10));

    CHECK(lambda_grid(0.0) == std::vector<double>{0.0});
    CHECK(lambda_grid(-3.0) == std::vector<double>{0.0});
}

TEST_CASE("lasso closed-form single-column case") {
    Eigen::MatrixXd X(2, 1);
    X << 1.0, -1.0;
    EncodedMatrix m = make_matrix(X, {"x"});
    Eigen::VectorXd beta = lasso_fit(m, {1.0, -1.0}, 1.0);
    // beta = (x'y - lambda/2) / x'x = (2 - 0.5) / 2
    CHECK(beta(0) == Catch::Approx(0.75).margin(1e-9));
}

TEST_CASE("lambda at or above lambda_max kills every coefficient") {
    std::mt19937 rng(41);
    Eigen::MatrixXd X = centered_random(rng, 30, 4);
    std::vector<double> y(30);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (auto& v : y) v = u(rng);

    EncodedMatrix m = make_matrix(X, {"a", "b", "c", "d"});
    const double lambda_max = lasso_lambda_max(m, y);
    // agrees with the independent formula up to summation order
    Eigen::Map<const Eigen::VectorXd> yv(y.data(), 30);
    Eigen::VectorXd y0 = yv.array() - yv.mean();
    CHECK(lambda_max ==
          Catch::Approx(2.0 * (X.transpose() * y0).cwiseAbs().maxCoeff()).epsilon(1e-12));

    CHECK(lasso_fit(m, y, lambda_max).isZero(0.0));
    CHECK(lasso_fit(m, y, 2.0 * lambda_max).isZero(0.0));
}

TEST_CASE("lasso at lambda 0 matches least squares") {
    std::mt19937 rng(42);
    Eigen::MatrixXd X = centered_random(rng, 40, 3);
    Eigen::VectorXd truth(3);
    truth << 1.5, -2.0, 0.5;
    Eigen::VectorXd yv = X * truth;
    std::vector<double> y(yv.data(), yv.data() + yv.size());

    EncodedMatrix m = make_matrix(X, {"a", "b", "c"});
    Eigen::VectorXd beta = lasso_fit(m, y, 0.0);
    Eigen::VectorXd y0 = yv.array() - yv.mean();
    Eigen::VectorXd ols = (X.transpose() * X).ldlt().solve(X.transpose() * y0);
    CHECK((beta - ols).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("lasso satisfies the stationarity conditions") {
    std::mt19937 rng(77);
    for (int rep = 0; rep < 10; ++rep) {
        std::uniform_int_distribution<Eigen::Index> pd(1, 8);
        const Eigen::Index p = pd(rng);
        Eigen::MatrixXd X = centered_random(rng, 35, p);
        std::vector<double> y(35);
        std::normal_distribution<double> g(0.0, 2.0);
        for (auto& v : y) v = g(rng);

        std::vector<std::string> names(static_cast<std::size_t>(p), "c");
        EncodedMatrix m = make_matrix(X, names);
        Eigen::Map<const Eigen::VectorXd> yv(y.data(), 35);
        Eigen::VectorXd y0 = yv.array() - yv.mean();
        const double lmax = 2.0 * (X.transpose() * y0).cwiseAbs().maxCoeff();
        for (double frac : {0.5, 0.1, 0.01}) {
            Eigen::VectorXd beta = lasso_fit(m, y, frac * lmax);
            CHECK(testsupport::kkt_violation(X, y, frac * lmax, beta) <= 1e-5);
        }
    }
}

TEST_CASE("lasso input validation and convergence error") {
    Eigen::MatrixXd X(2, 1);
    X << 1.0, -1.0;
    EncodedMatrix m = make_matrix(X, {"x"});
    CHECK_THROWS_AS(lasso_fit(m, {1.0, -1.0}, -0.5), std::invalid_argument);
    CHECK_THROWS_AS(lasso_fit(m, {1.0}, 0.5), std::invalid_argument);
}

TEST_CASE("cross-validation on fold-balanced noiseless data") {
    // x repeats {-2,-1,0,1,2} so every fold and its complement have mean 0;
    // y = 2x + 1 exactly
    const std::size_t n = 25;
    Eigen::MatrixXd X(n, 1);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        X(static_cast<Eigen::Index>(i), 0) = static_cast<double>(i % 5) - 2.0;
        y[i] = 2.0 * X(static_cast<Eigen::Index>(i), 0) + 1.0;
    }
    EncodedMatrix m = make_matrix(X, {"x"});
    LassoPath path = lasso_cv(m, y);

    REQUIRE(path.lambdas.size() == 100);
    REQUIRE(path.cv_mean.size() == 100);
    REQUIRE(path.cv_stderr.size() == 100);
    CHECK(*std::min_element(path.cv_mean.begin(), path.cv_mean.end()) < 1e-4);

    // the one-standard-error rule, recomputed independently
    std::size_t best = static_cast<std::size_t>(
        std::min_element(path.cv_mean.begin(), path.cv_mean.end()) - path.cv_mean.begin());
    const double cutoff = path.cv_mean[best] + path.cv_stderr[best];
    std::size_t expected = 0;
    while (path.cv_mean[expected] > cutoff) ++expected;
    CHECK(path.chosen == expected);
    for (std::size_t i = 0; i < path.chosen; ++i) CHECK(path.cv_mean[i] > cutoff);
}

TEST_CASE("pure-noise target selects the null model") {
    std::mt19937 rng(1234);
    Eigen::MatrixXd X = centered_random(rng, 50, 4);
    std::vector<double> y(50);
    std::normal_distribution<double> g(0.0, 1.0);
    for (auto& v : y) v = g(rng);

    EncodedMatrix m = make_matrix(X, {"a", "b", "c", "d"});
    LassoPath path = lasso_cv(m, y);
    Eigen::VectorXd beta = lasso_fit(m, y, path.lambdas[path.chosen]);
    CHECK(beta.isZero(0.0));
}

TEST_CASE("lasso_cv requires five rows") {
    Eigen::MatrixXd X(4, 1);
    X << 1, 2, 3, 4;
    EncodedMatrix m = make_matrix(X, {"x"});
    CHECK_THROWS_AS(lasso_cv(m, {1, 2, 3, 4}), std::invalid_argument);
}

TEST_CASE("vif filter keeps orthogonal columns") {
    Eigen::MatrixXd X(4, 3);
    X << 1, 1, 1, 1, -1, -1, -1, 1, -1, -1, -1, 1;
    EncodedMatrix m = make_matrix(X, {"a", "b", "c"});
    auto [kept, removed] = vif_filter(m);
    CHECK(removed.empty());
    CHECK(kept.column_names == std::vector<std::string>{"a", "b", "c"});
}

TEST_CASE("vif filter removes the later duplicate") {
    std::mt19937 rng(5);
    Eigen::MatrixXd base = centered_random(rng, 20, 2);
    Eigen::MatrixXd X(20, 3);
    X.col(0) = base.col(0);
    X.col(1) = base.col(0);  // exact duplicate of column 0
    X.col(2) = base.col(1);
    EncodedMatrix m = make_matrix(X, {"a", "a_copy", "b"});
    auto [kept, removed] = vif_filter(m);
    CHECK(removed == std::vector<std::string>{"a_copy"});
    CHECK(kept.column_names == std::vector<std::string>{"a", "b"});
    CHECK(kept.origin == std::vector<std::size_t>{0, 2});
}

TEST_CASE("near-collinear triple loses exactly one column") {
    std::mt19937 rng(6);
    Eigen::MatrixXd X(40, 3);
    Eigen::MatrixXd base = centered_random(rng, 40, 2);
    std::normal_distribution<double> tiny(0.0, 1e-3);
    X.col(0) = base.col(0);
    X.col(1) = base.col(1);
    X.col(2) = base.col(0) + base.col(1);
    for (Eigen::Index i = 0; i < 40; ++i) X(i, 2) += tiny(rng);

    // agreement with the direct row-space VIF computation
    EncodedMatrix m = make_matrix(X, {"c1", "c2", "c3"});
    Eigen::VectorXd dummy = Eigen::VectorXd::Zero(40);
    auto stats = loclin::detail::gram_stats(m.values, dummy);
    std::vector<std::size_t> all = {0, 1, 2};
    for (Eigen::Index k = 0; k < 3; ++k) {
        double direct = testsupport::direct_vif(X, k);
        double viagram = loclin::detail::vif_from_centered_gram(
            stats.gram - stats.colsum * stats.colsum.transpose() / 40.0, stats.gram, all,
            static_cast<std::size_t>(k));
        CHECK(viagram == Catch::Approx(direct).epsilon(1e-6));
        CHECK(direct > 10.0);
    }

    auto [kept, removed] = vif_filter(m);
    CHECK(removed.size() == 1);
    CHECK(kept.column_names.size() == 2);
}

TEST_CASE("vif filter input validation") {
    Eigen::MatrixXd one_col(5, 1);
    one_col << 1, 2, 3, 4, 5;
    CHECK_THROWS_AS(vif_filter(make_matrix(one_col, {"x"})), std::invalid_argument);

    Eigen::MatrixXd one_row(1, 2);
    one_row << 1, 2;
    CHECK_THROWS_AS(vif_filter(make_matrix(one_row, {"x", "y"})), std::invalid_argument);
}

TEST_CASE("surrogate recovers an exact linear generator") {
    std::mt19937 rng(9);
    Eigen::MatrixXd X = centered_random(rng, 10, 3);
    std::vector<double> y(10);
    for (Eigen::Index i = 0; i < 10; ++i) y[static_cast<std::size_t>(i)] = 2.0 * X(i, 0) + 1.0;

    EncodedMatrix m = make_matrix(X, {"x1", "x2", "x3"});
    SurrogateModel model = train_local_surrogate(m, y);

    REQUIRE(model.selected_names == std::vector<std::string>{"x1"});
    CHECK(model.coefficients[0] == Catch::Approx(2.0).margin(1e-6));
    CHECK(model.intercept == Catch::Approx(1.0).margin(1e-6));
    CHECK(model.train_rmse < 1e-6);
}

TEST_CASE("constant target yields the intercept-only model") {
    std::mt19937 rng(10);
    Eigen::MatrixXd X = centered_random(rng, 12, 2);
    std::vector<double> y(12, 7.25);
    EncodedMatrix m = make_matrix(X, {"a", "b"});
    SurrogateModel model = train_local_surrogate(m, y);
    CHECK(model.selected.empty());
    CHECK(model.intercept == 7.25);
    CHECK(model.train_rmse == 0.0);
    Eigen::RowVectorXd x = Eigen::RowVectorXd::Zero(2);
    CHECK(model.predict(x) == 7.25);
}

TEST_CASE("duplicate column falls to the filter, survivor carries the weight") {
    std::mt19937 rng(11);
    Eigen::MatrixXd base = centered_random(rng, 15, 2);
    Eigen::MatrixXd X(15, 3);
    X.col(0) = base.col(0);
    X.col(1) = base.col(0);
    X.col(2) = base.col(1);
    std::vector<double> y(15);
    for (Eigen::Index i = 0; i < 15; ++i) y[static_cast<std::size_t>(i)] = X(i, 0);

    EncodedMatrix m = make_matrix(X, {"x1", "x2", "x3"});
    SurrogateModel model = train_local_surrogate(m, y);
    CHECK(model.removed_by_vif == std::vector<std::string>{"x2"});
    REQUIRE(model.selected_names == std::vector<std::string>{"x1"});
    CHECK(model.coefficients[0] == Catch::Approx(1.0).margin(1e-6));
}

TEST_CASE("refit never loses to the raw lasso in-sample") {
    std::mt19937 rng(13);
    for (int rep = 0; rep < 8; ++rep) {
        Eigen::MatrixXd X = centered_random(rng, 30, 4);
        std::vector<double> y(30);
        std::normal_distribution<double> g(0.0, 1.0);
        for (Eigen::Index i = 0; i < 30; ++i)
            y[static_cast<std::size_t>(i)] = 1.2 * X(i, 0) - 0.7 * X(i, 2) + 0.3 * g(rng);

        EncodedMatrix m = make_matrix(X, {"a", "b", "c", "d"});
        SurrogateModel model = train_local_surrogate(m, y);

        Eigen::VectorXd beta = lasso_fit(m, y, model.lambda);
        Eigen::Map<const Eigen::VectorXd> yv(y.data(), 30);
        const double ybar = yv.mean();
        const double lasso_sse = (yv.array() - ybar - (X * beta).array()).square().sum();
        const double lasso_rmse = std::sqrt(lasso_sse / 30.0);
        CHECK(model.train_rmse <= lasso_rmse + 1e-12);
    }
}

TEST_CASE("training is bitwise deterministic") {
    std::mt19937 rng(14);
    Eigen::MatrixXd X = centered_random(rng, 25, 3);
    std::vector<double> y(25);
    std::normal_distribution<double> g(0.0, 1.0);
    for (auto& v : y) v = g(rng);

    EncodedMatrix m = make_matrix(X, {"a", "b", "c"});
    SurrogateModel m1 = train_local_surrogate(m, y);
    SurrogateModel m2 = train_local_surrogate(m, y);
    CHECK(m1.intercept == m2.intercept);
    CHECK(m1.selected == m2.selected);
    CHECK(m1.coefficients == m2.coefficients);
    CHECK(m1.lambda == m2.lambda);
    CHECK(m1.train_rmse == m2.train_rmse);
}

TEST_CASE("surrogate requires five rows") {
    Eigen::MatrixXd X(4, 2);
    X.setRandom();
    EncodedMatrix m = make_matrix(X, {"a", "b"});
    CHECK_THROWS_AS(train_local_surrogate(m, {1, 2, 3, 4}), std::invalid_argument);
}

TEST_CASE("selection overlap against exhaustive best-subset CV (report only)") {
    std::mt19937 rng(15);
    const Eigen::Index n = 40, p = 5;
    Eigen::MatrixXd X = centered_random(rng, n, p);
    std::vector<double> y(static_cast<std::size_t>(n));
    std::normal_distribution<double> g(0.0, 0.2);
    for (Eigen::Index i = 0; i < n; ++i)
        y[static_cast<std::size_t>(i)] = 2.0 * X(i, 1) - 1.0 * X(i, 3) + g(rng);
    Eigen::Map<const Eigen::VectorXd> yv(y.data(), n);

    EncodedMatrix m = make_matrix(X, {"a", "b", "c", "d", "e"});
    SurrogateModel model = train_local_surrogate(m, y);

    // exhaustive best-subset by 5-fold CV with an OLS fit per subset
    auto folds = cv_folds(static_cast<std::size_t>(n));
    double best_err = std::numeric_limits<double>::infinity();
    std::vector<std::size_t> best_subset;
    for (unsigned mask = 0; mask < (1u << p); ++mask) {
        std::vector<Eigen::Index> cols;
        for (Eigen::Index j = 0; j < p; ++j)
            if (mask & (1u << j)) cols.push_back(j);
        double err = 0.0;
        for (auto [b, e] : folds) {
            std::vector<Eigen::Index> train_rows, test_rows;
            for (Eigen::Index i = 0; i < n; ++i)
                (static_cast<std::size_t>(i) >= b && static_cast<std::size_t>(i) < e
                     ? test_rows
                     : train_rows)
                    .push_back(i);
            Eigen::MatrixXd Dt(train_rows.size(), cols.size() + 1);
            Dt.col(0).setOnes();
            for (std::size_t k = 0; k < cols.size(); ++k)
                for (std::size_t i = 0; i < train_rows.size(); ++i)
                    Dt(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k) + 1) =
                        X(train_rows[i], cols[k]);
            Eigen::VectorXd yt(train_rows.size());
            for (std::size_t i = 0; i < train_rows.size(); ++i) yt(static_cast<Eigen::Index>(i)) = yv(train_rows[i]);
            Eigen::VectorXd theta = Dt.completeOrthogonalDecomposition().solve(yt);
            for (Eigen::Index i : test_rows) {
                double pred = theta(0);
                for (std::size_t k = 0; k < cols.size(); ++k)
                    pred += theta(static_cast<Eigen::Index>(k) + 1) * X(i, cols[k]);
                err += (pred - yv(i)) * (pred - yv(i));
            }
        }
        if (err < best_err) {
            best_err = err;
            best_subset.assign(cols.begin(), cols.end());
        }
    }

    std::vector<std::size_t> sel = model.selected;
    std::vector<std::size_t> inter, uni;
    std::set_intersection(sel.begin(), sel.end(), best_subset.begin(), best_subset.end(),
                          std::back_inserter(inter));
    std::set_union(sel.begin(), sel.end(), best_subset.begin(), best_subset.end(),
                   std::back_inserter(uni));
    const double overlap = uni.empty() ? 1.0
                                       : static_cast<double>(inter.size()) /
                                             static_cast<double>(uni.size());
    std::cout << "[subset-overlap] lasso selection vs best-subset CV: " << overlap << "\n";
    CHECK(overlap >= 0.0);
    CHECK(overlap <= 1.0);
}
