#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "loclin/dataset.hpp"

namespace loclin {

/// Sparse local linear model: prediction is intercept + Σ coefficient·x[col]
/// over the selected encoded columns, summed in ascending column order.
struct SurrogateModel {
    double intercept = 0.0;
    std::vector<std::size_t> selected;        // encoded column indices, ascending
    std::vector<std::string> selected_names;  // aligned with selected
    std::vector<double> coefficients;         // aligned with selected
    double lambda = 0.0;
    double train_rmse = 0.0;
    std::vector<std::string> removed_by_vif;  // in removal order

    double predict(const Eigen::RowVectorXd& x) const {
        double s = intercept;
        for (std::size_t k = 0; k < selected.size(); ++k)
            s += coefficients[k] * x(static_cast<Eigen::Index>(selected[k]));
        return s;
    }
};

/// Cross-validation trace over the shrinkage grid (descending lambdas).
struct LassoPath {
    std::vector<double> lambdas;
    std::vector<double> cv_mean;    // per-lambda mean fold MSE
    std::vector<double> cv_stderr;  // per-lambda std error across folds
    std::size_t chosen = 0;         // one-standard-error pick
};

/// Five contiguous row slices in existing order: n = 5q + r gives r folds
/// of size q+1 followed by 5−r folds of size q.
inline std::vector<std::pair<std::size_t, std::size_t>> cv_folds(std::size_t n) {
    if (n < 5) throw std::invalid_argument("cross-validation needs at least 5 rows");
    const std::size_t q = n / 5;
    const std::size_t r = n % 5;
    std::vector<std::pair<std::size_t, std::size_t>> folds;
    std::size_t b = 0;
    for (std::size_t f = 0; f < 5; ++f) {
        const std::size_t len = q + (f < r ? 1 : 0);
        folds.push_back({b, b + len});
        b += len;
    }
    return folds;
}

/// 100 geometric points from lambda_max down three decades. A non-positive
/// lambda_max collapses to the single unpenalized point.
inline std::vector<double> lambda_grid(double lambda_max) {
    if (!(lambda_max > 0.0)) return {0.0};
    std::vector<double> g(100);
    for (int i = 0; i < 100; ++i)
        g[static_cast<std::size_t>(i)] = lambda_max * std::pow(1e-3, i / 99.0);
    return g;
}

namespace detail {

using ConstMatrixView = Eigen::Ref<const Eigen::MatrixXd, 0, Eigen::OuterStride<>>;
using ConstVectorView = Eigen::Ref<const Eigen::VectorXd>;

/// Sufficient statistics for Gram-form fitting; fold statistics subtract
/// from the full-table ones.
struct GramStats {
    Eigen::MatrixXd gram;    // X^T X
    Eigen::VectorXd xty;     // X^T y
    Eigen::VectorXd colsum;  // X^T 1
    double ysum = 0.0;
    double yy = 0.0;
    std::size_t n = 0;
};

inline GramStats gram_stats(const ConstMatrixView& X, const ConstVectorView& y) {
    GramStats s;
    s.gram = X.transpose() * X;
    s.xty = X.transpose() * y;
    s.colsum = X.colwise().sum();
    s.ysum = y.sum();
    s.yy = y.squaredNorm();
    s.n = static_cast<std::size_t>(X.rows());
    return s;
}

/// Cyclic coordinate descent on ||y0 - X b||^2 + lambda*||b||_1 given
/// G = X^T X and c = X^T y0. Updates `beta` in place (warm start allowed).
/// Columns with zero diagonal never move off zero.
inline void lasso_cd_gram(const Eigen::MatrixXd& G, const Eigen::VectorXd& c, double lambda,
                          Eigen::VectorXd& beta) {
    const Eigen::Index p = G.cols();
    const double thr = lambda / 2.0;
    Eigen::VectorXd gb = G * beta;
    for (int sweep = 1; sweep <= 100000; ++sweep) {
        double max_delta = 0.0;
        for (Eigen::Index j = 0; j < p; ++j) {
            const double gjj = G(j, j);
            if (gjj <= 0.0) continue;
            const double z = c(j) - gb(j) + gjj * beta(j);
            double bnew = 0.0;
            if (z > thr)
                bnew = (z - thr) / gjj;
            else if (z < -thr)
                bnew = (z + thr) / gjj;
            const double d = bnew - beta(j);
            if (d != 0.0) {
                gb += d * G.col(j);
                beta(j) = bnew;
                max_delta = std::max(max_delta, std::abs(d));
            }
        }
        if (max_delta < 1e-8) return;
    }
    throw std::runtime_error("coordinate descent did not converge after 100000 sweeps");
}

/// VIF of column k among `cols`, from the centered Gram C (regression on
/// the other columns plus an intercept). Constant or exactly explained
/// columns report +infinity.
inline double vif_from_centered_gram(const Eigen::MatrixXd& C, const Eigen::MatrixXd& G,
                                     const std::vector<std::size_t>& cols, std::size_t k) {
    const double inf = std::numeric_limits<double>::infinity();
    const double sst = C(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
    const double floor = 1e-12 * std::max(1.0, G(static_cast<Eigen::Index>(k),
                                                 static_cast<Eigen::Index>(k)));
    if (!(sst > floor)) return inf;

    std::vector<Eigen::Index> others;
    for (std::size_t c : cols)
        if (c != k) others.push_back(static_cast<Eigen::Index>(c));
    Eigen::MatrixXd Coo = C(others, others);
    Eigen::VectorXd Cok = C(others, static_cast<Eigen::Index>(k));
    Eigen::VectorXd theta = Coo.completeOrthogonalDecomposition().solve(Cok);
    const double sse = sst - theta.dot(Cok);
    if (!(sse > 1e-10 * sst)) return inf;
    return sst / sse;
}

/// Iteratively removes the highest-VIF column while that VIF exceeds 10;
/// ties go to the later column. Stops once a single column remains.
/// Returns (kept ascending, removed in removal order).
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> vif_partition(
    const GramStats& s) {
    const std::size_t p = static_cast<std::size_t>(s.gram.cols());
    Eigen::MatrixXd C =
        s.gram - s.colsum * s.colsum.transpose() / static_cast<double>(s.n);
    std::vector<std::size_t> cols(p);
    std::iota(cols.begin(), cols.end(), std::size_t{0});
    std::vector<std::size_t> removed;
    while (cols.size() >= 2) {
        double worst = -1.0;
        std::size_t worst_pos = 0;
        for (std::size_t pos = 0; pos < cols.size(); ++pos) {
            const double v = vif_from_centered_gram(C, s.gram, cols, cols[pos]);
            if (v >= worst) {
                worst = v;
                worst_pos = pos;
            }
        }
        if (!(worst > 10.0)) break;
        removed.push_back(cols[worst_pos]);
        cols.erase(cols.begin() + static_cast<std::ptrdiff_t>(worst_pos));
    }
    return {cols, removed};
}

/// Lasso path with 5-fold CV on precomputed statistics. The lambda grid
/// comes from the full input, shared across folds; fold MSE is evaluated
/// through the Gram identity SSE = Syy − 2βᵀv + βᵀG_f β.
inline LassoPath cv_path(const ConstMatrixView& X, const ConstVectorView& y,
                         const GramStats& full) {
    const std::size_t n = full.n;
    const auto folds = cv_folds(n);
    const double ybar = full.ysum / static_cast<double>(n);
    const Eigen::VectorXd c_full = full.xty - ybar * full.colsum;
    const double lambda_max = c_full.size() > 0 ? 2.0 * c_full.cwiseAbs().maxCoeff() : 0.0;

    LassoPath path;
    path.lambdas = lambda_grid(lambda_max);
    const std::size_t L = path.lambdas.size();
    Eigen::MatrixXd fold_mse(5, static_cast<Eigen::Index>(L));

    for (std::size_t f = 0; f < 5; ++f) {
        const auto [b, e] = folds[f];
        const Eigen::Index fb = static_cast<Eigen::Index>(b);
        const Eigen::Index fn = static_cast<Eigen::Index>(e - b);
        GramStats fs = gram_stats(X.middleRows(fb, fn), y.segment(fb, fn));

        const double n_t = static_cast<double>(n - fs.n);
        const double ybar_t = (full.ysum - fs.ysum) / n_t;
        const Eigen::MatrixXd G_t = full.gram - fs.gram;
        const Eigen::VectorXd c_t = (full.xty - fs.xty) - ybar_t * (full.colsum - fs.colsum);

        const Eigen::VectorXd v_f = fs.xty - ybar_t * fs.colsum;
        const double syy = fs.yy - 2.0 * ybar_t * fs.ysum +
                           static_cast<double>(fs.n) * ybar_t * ybar_t;

        Eigen::VectorXd beta = Eigen::VectorXd::Zero(full.gram.cols());
        for (std::size_t li = 0; li < L; ++li) {
            lasso_cd_gram(G_t, c_t, path.lambdas[li], beta);
            const double sse = syy - 2.0 * beta.dot(v_f) + beta.dot(fs.gram * beta);
            fold_mse(static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(li)) =
                std::max(sse, 0.0) / static_cast<double>(fs.n);
        }
    }

    path.cv_mean.resize(L);
    path.cv_stderr.resize(L);
    for (std::size_t li = 0; li < L; ++li) {
        const auto col = fold_mse.col(static_cast<Eigen::Index>(li));
        const double mean = col.mean();
        const double var = (col.array() - mean).square().sum() / 4.0;
        path.cv_mean[li] = mean;
        path.cv_stderr[li] = std::sqrt(var / 5.0);
    }

    std::size_t best = 0;
    for (std::size_t li = 1; li < L; ++li)
        if (path.cv_mean[li] < path.cv_mean[best]) best = li;
    const double cutoff = path.cv_mean[best] + path.cv_stderr[best];
    path.chosen = best;
    for (std::size_t li = 0; li < L; ++li)
        if (path.cv_mean[li] <= cutoff) {
            path.chosen = li;  // lambdas descend, so the first hit is the largest
            break;
        }
    return path;
}

/// Full training pipeline on a row block: VIF filter (3+ columns only),
/// CV lasso for selection, OLS refit on the support.
inline SurrogateModel train_on_block(const ConstMatrixView& X,
                                     const std::vector<std::string>& names,
                                     const ConstVectorView& y) {
    const std::size_t n = static_cast<std::size_t>(X.rows());
    const std::size_t p = static_cast<std::size_t>(X.cols());
    if (n != static_cast<std::size_t>(y.size()))
        throw std::invalid_argument("row/target count mismatch");
    if (n < 5) throw std::invalid_argument("surrogate training needs at least 5 rows");
    if (p == 0 || names.size() != p)
        throw std::invalid_argument("surrogate training needs named columns");

    GramStats full = gram_stats(X, y);

    std::vector<std::size_t> kept(p);
    std::iota(kept.begin(), kept.end(), std::size_t{0});
    SurrogateModel model;
    if (p >= 3) {
        auto [k, rem] = vif_partition(full);
        kept = std::move(k);
        for (std::size_t idx : rem) model.removed_by_vif.push_back(names[idx]);
    }
    if (kept.empty())
        throw std::runtime_error("collinearity filter removed every column");

    std::vector<Eigen::Index> kept_ix(kept.begin(), kept.end());
    Eigen::MatrixXd Xk = X(Eigen::all, kept_ix);
    GramStats ks = gram_stats(Xk, y);
    LassoPath path = cv_path(Xk, y, ks);
    model.lambda = path.lambdas[path.chosen];

    const double ybar = ks.ysum / static_cast<double>(n);
    const Eigen::VectorXd c = ks.xty - ybar * ks.colsum;
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(kept.size()));
    lasso_cd_gram(ks.gram, c, model.lambda, beta);

    std::vector<Eigen::Index> support;
    for (Eigen::Index j = 0; j < beta.size(); ++j)
        if (beta(j) != 0.0) support.push_back(j);

    if (support.empty()) {
        model.intercept = ybar;
        const double sse = (y.array() - ybar).square().sum();
        model.train_rmse = std::sqrt(sse / static_cast<double>(n));
        return model;
    }

    Eigen::MatrixXd D(static_cast<Eigen::Index>(n),
                      static_cast<Eigen::Index>(support.size()) + 1);
    D.col(0).setOnes();
    for (std::size_t k = 0; k < support.size(); ++k)
        D.col(static_cast<Eigen::Index>(k) + 1) = Xk.col(support[k]);
    const Eigen::VectorXd theta = D.completeOrthogonalDecomposition().solve(y);

    model.intercept = theta(0);
    for (std::size_t k = 0; k < support.size(); ++k) {
        const std::size_t col = kept[static_cast<std::size_t>(support[k])];
        model.selected.push_back(col);
        model.selected_names.push_back(names[col]);
        model.coefficients.push_back(theta(static_cast<Eigen::Index>(k) + 1));
    }
    const double sse = (y - D * theta).squaredNorm();
    model.train_rmse = std::sqrt(sse / static_cast<double>(n));
    return model;
}

}  // namespace detail

/// Removes collinear encoded columns: repeatedly drops the column with the
/// highest VIF while it exceeds 10. Returns the surviving matrix and the
/// removed column names in removal order.
inline std::pair<EncodedMatrix, std::vector<std::string>> vif_filter(const EncodedMatrix& m) {
    if (m.values.cols() < 2) throw std::invalid_argument("vif_filter needs at least 2 columns");
    if (m.values.rows() < 2) throw std::invalid_argument("vif_filter needs at least 2 rows");

    Eigen::VectorXd dummy_y = Eigen::VectorXd::Zero(m.values.rows());
    detail::GramStats s = detail::gram_stats(m.values, dummy_y);
    auto [kept, removed] = detail::vif_partition(s);
    if (kept.empty()) {
        std::string all;
        for (const auto& n : m.column_names) all += (all.empty() ? "" : ", ") + n;
        throw std::runtime_error("collinearity filter removed every column: " + all);
    }

    EncodedMatrix out;
    std::vector<Eigen::Index> ix(kept.begin(), kept.end());
    out.values = m.values(Eigen::all, ix);
    for (std::size_t k : kept) {
        out.column_names.push_back(m.column_names[k]);
        out.origin.push_back(m.origin[k]);
    }
    std::vector<std::string> removed_names;
    for (std::size_t k : removed) removed_names.push_back(m.column_names[k]);
    return {std::move(out), std::move(removed_names)};
}

/// Smallest shrinkage that zeroes every coefficient: 2·max_j |x_jᵀ(y − ȳ)|.
/// Any λ at or above this value makes the all-zero vector optimal.
inline double lasso_lambda_max(const EncodedMatrix& m, const std::vector<double>& y) {
    const std::size_t n = static_cast<std::size_t>(m.values.rows());
    if (n == 0 || n != y.size())
        throw std::invalid_argument("lasso_lambda_max: row/target mismatch");
    Eigen::Map<const Eigen::VectorXd> yv(y.data(), static_cast<Eigen::Index>(n));
    detail::GramStats s = detail::gram_stats(m.values, yv);
    const double ybar = s.ysum / static_cast<double>(n);
    const Eigen::VectorXd c = s.xty - ybar * s.colsum;
    return c.size() > 0 ? 2.0 * c.cwiseAbs().maxCoeff() : 0.0;
}

/// Minimizer of ||y − Xβ||² + λ||β||₁ (no 1/n factor); the intercept is
/// handled by centering y only. Returns a dense coefficient vector.
inline Eigen::VectorXd lasso_fit(const EncodedMatrix& m, const std::vector<double>& y,
                                 double lambda) {
    if (lambda < 0.0) throw std::invalid_argument("lasso_fit: negative lambda");
    const std::size_t n = static_cast<std::size_t>(m.values.rows());
    if (n == 0 || n != y.size()) throw std::invalid_argument("lasso_fit: row/target mismatch");

    Eigen::Map<const Eigen::VectorXd> yv(y.data(), static_cast<Eigen::Index>(n));
    detail::GramStats s = detail::gram_stats(m.values, yv);
    const double ybar = s.ysum / static_cast<double>(n);
    const Eigen::VectorXd c = s.xty - ybar * s.colsum;
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(m.values.cols());
    detail::lasso_cd_gram(s.gram, c, lambda, beta);
    return beta;
}

/// Lasso path under deterministic 5-fold CV with the one-standard-error
/// choice of lambda.
inline LassoPath lasso_cv(const EncodedMatrix& m, const std::vector<double>& y) {
    const std::size_t n = static_cast<std::size_t>(m.values.rows());
    if (n != y.size()) throw std::invalid_argument("lasso_cv: row/target mismatch");
    Eigen::Map<const Eigen::VectorXd> yv(y.data(), static_cast<Eigen::Index>(n));
    detail::GramStats s = detail::gram_stats(m.values, yv);
    return detail::cv_path(m.values, yv, s);
}

/// VIF filter, CV lasso selection, then an OLS refit restricted to the
/// selected columns (minimum-norm on rank-deficient designs). An empty
/// selection yields the intercept-only model at mean(y).
inline SurrogateModel train_local_surrogate(const EncodedMatrix& m,
                                            const std::vector<double>& y) {
    Eigen::Map<const Eigen::VectorXd> yv(y.data(), static_cast<Eigen::Index>(y.size()));
    return detail::train_on_block(m.values, m.column_names, yv);
}

}  // namespace loclin
