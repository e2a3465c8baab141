#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "loclin/counterfactual.hpp"
#include "loclin/dataset.hpp"
#include "loclin/explainer.hpp"
#include "loclin/parallel.hpp"

namespace loclin {

struct EvaluationOptions {
    ExplainOptions explain;
    std::optional<std::vector<std::size_t>> test_indices;  // default: trailing 20%
    std::size_t knn = 10;   // robustness neighbor count
    std::size_t top_k = 5;  // recovery cutoff
    bool with_counterfactual = true;
};

struct PerPointDetail {
    std::size_t row = 0;
    double target = 0.0;
    double predicted = 0.0;
    std::size_t neighborhood_size = 0;
    double r_lower = 0.0;
    std::size_t term_count = 0;
};

struct CounterfactualFidelity {
    std::optional<double> rmse;  // empty when every attempt was skipped
    std::size_t skipped = 0;
    std::size_t attempts = 0;
};

struct EvaluationReport {
    std::size_t table_rows = 0;
    std::vector<std::size_t> test_indices;
    double fidelity_rmse = 0.0;
    double generality_percent = 0.0;  // in [0, 100]
    double simplicity_mean = 0.0;
    double robustness_mean = 0.0;  // in [0, 1]
    std::size_t robustness_knn = 0;
    CounterfactualFidelity counterfactual;
    std::size_t top_k = 0;
    std::optional<double> topk_recovery_percent;  // empty when columns < top_k
    std::vector<PerPointDetail> per_point;
};

/// Trailing 20% of rows (at least one), in row order.
inline std::vector<std::size_t> default_test_split(const Dataset& ds) {
    const std::size_t n = ds.size();
    if (n == 0) throw std::invalid_argument("dataset is empty");
    const std::size_t m = std::max<std::size_t>(1, n / 5);
    std::vector<std::size_t> idx;
    idx.reserve(m);
    for (std::size_t i = n - m; i < n; ++i) idx.push_back(i);
    return idx;
}

namespace detail {

inline void check_test_indices(const Dataset& ds, const std::vector<std::size_t>& test) {
    if (test.empty()) throw std::invalid_argument("test index set is empty");
    for (std::size_t i : test)
        if (i >= ds.size())
            throw std::invalid_argument("test index " + std::to_string(i) +
                                        " out of range (dataset has " +
                                        std::to_string(ds.size()) + " rows)");
}

/// Coefficient-vector distance over the union of both explanations'
/// features: mean of |b1-b2|/(|b1|+|b2|) with absent features as 0 and a
/// 0/0 term contributing 0. Identical explanations (even empty) give 0.
inline double explanation_distance(const Explanation& a, const Explanation& b) {
    std::map<std::string, std::pair<double, double>> merged;
    for (const auto& t : a.terms) merged[t.feature].first = t.coefficient;
    for (const auto& t : b.terms) merged[t.feature].second = t.coefficient;
    if (merged.empty()) return 0.0;
    double s = 0.0;
    for (const auto& [name, c] : merged) {
        const double denom = std::abs(c.first) + std::abs(c.second);
        if (denom > 0.0) s += std::abs(c.first - c.second) / denom;
    }
    return s / static_cast<double>(merged.size());
}

inline std::vector<Explanation> explain_all(const Explainer& ex,
                                            const std::vector<std::size_t>& test) {
    std::vector<Explanation> out(test.size());
    parallel_for(std::size_t{0}, test.size(),
                 [&](std::size_t k) { out[k] = ex.explain_row(test[k]); });
    return out;
}

inline double fidelity_impl(const Explainer& ex, const std::vector<Explanation>& es,
                            const std::vector<std::size_t>& test) {
    double s = 0.0;
    for (std::size_t k = 0; k < test.size(); ++k) {
        const double r = es[k].predicted - ex.dataset().target(test[k]);
        s += r * r;
    }
    return std::sqrt(s / static_cast<double>(test.size()));
}

inline double generality_impl(const Dataset& ds, const std::vector<Explanation>& es) {
    double s = 0.0;
    for (const Explanation& e : es)
        s += 100.0 * static_cast<double>(e.neighborhood_size - 1) /
             static_cast<double>(ds.size());
    return s / static_cast<double>(es.size());
}

inline double simplicity_impl(const std::vector<Explanation>& es) {
    double s = 0.0;
    for (const Explanation& e : es) s += static_cast<double>(e.terms.size());
    return s / static_cast<double>(es.size());
}

inline double robustness_impl(const Explainer& ex, const std::vector<Explanation>& es,
                              const std::vector<std::size_t>& test, std::size_t k) {
    const Dataset& ds = ex.dataset();
    if (ds.size() < k + 1)
        throw std::invalid_argument("robustness over " + std::to_string(k) +
                                    " neighbors needs at least " + std::to_string(k + 1) +
                                    " rows");
    std::vector<double> per_point(test.size());
    parallel_for(std::size_t{0}, test.size(), [&](std::size_t t) {
        const std::vector<Neighbor> dist = ex.distances(ds.row(test[t]));
        double s = 0.0;
        std::size_t taken = 0;
        for (const Neighbor& nb : dist) {
            if (nb.row == test[t]) continue;  // self; distance-0 duplicates stay
            s += 1.0 - explanation_distance(es[t], ex.explain_row(nb.row));
            if (++taken == k) break;
        }
        per_point[t] = s / static_cast<double>(taken);
    });
    double s = 0.0;
    for (double v : per_point) s += v;
    return s / static_cast<double>(per_point.size());
}

inline CounterfactualFidelity counterfactual_fidelity_impl(
    const Explainer& ex, const std::vector<std::size_t>& test) {
    const Dataset& ds = ex.dataset();
    const auto [lo, hi] = std::minmax_element(ds.targets().begin(), ds.targets().end());
    const double shift = 0.3 * (*hi - *lo);

    struct Attempt {
        std::size_t row;
        double ref;
    };
    std::vector<Attempt> attempts;
    for (std::size_t i : test) {
        attempts.push_back({i, ds.target(i) + shift});
        attempts.push_back({i, ds.target(i) - shift});
    }

    std::vector<std::optional<double>> sqdev(attempts.size());
    parallel_for(std::size_t{0}, attempts.size(), [&](std::size_t k) {
        CounterfactualQuery q;
        q.point = ds.row(attempts[k].row);
        q.reference_value = attempts[k].ref;
        try {
            const CounterfactualExplanation ce = counterfactual(ex, q);
            const double d = ce.predicted_at_modified - attempts[k].ref;
            sqdev[k] = d * d;
        } catch (const CandidateNotFound&) {
        } catch (const CounterfactualInconsistent&) {
        }
    });

    CounterfactualFidelity out;
    out.attempts = attempts.size();
    double s = 0.0;
    std::size_t n = 0;
    for (const auto& v : sqdev) {
        if (v) {
            s += *v;
            ++n;
        } else {
            ++out.skipped;
        }
    }
    if (n > 0) out.rmse = std::sqrt(s / static_cast<double>(n));
    return out;
}

/// Top-k encoded columns of a full-table least-squares fit, by descending
/// |coefficient| with column order breaking ties.
inline std::vector<std::string> global_top_features(const Explainer& ex, std::size_t k) {
    const EncodedMatrix& enc = ex.encoded();
    const std::size_t p = static_cast<std::size_t>(enc.values.cols());
    if (p < k)
        throw std::invalid_argument("top-" + std::to_string(k) + " recovery needs at least " +
                                    std::to_string(k) + " encoded columns, have " +
                                    std::to_string(p));
    const Eigen::Index n = enc.values.rows();
    Eigen::MatrixXd design(n, enc.values.cols() + 1);
    design.col(0).setOnes();
    design.rightCols(enc.values.cols()) = enc.values;
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) y(i) = ex.dataset().target(static_cast<std::size_t>(i));
    const Eigen::VectorXd beta = design.completeOrthogonalDecomposition().solve(y);

    std::vector<std::size_t> order(p);
    for (std::size_t j = 0; j < p; ++j) order[j] = j;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::abs(beta(static_cast<Eigen::Index>(a) + 1)) >
               std::abs(beta(static_cast<Eigen::Index>(b) + 1));
    });
    std::vector<std::string> names;
    for (std::size_t j = 0; j < k; ++j) names.push_back(enc.column_names[order[j]]);
    return names;
}

inline double topk_recovery_impl(const Explainer& ex, const std::vector<Explanation>& es,
                                 std::size_t k) {
    const std::vector<std::string> top = global_top_features(ex, k);
    double s = 0.0;
    for (const Explanation& e : es) {
        std::size_t hits = 0;
        for (const std::string& name : top)
            for (const auto& t : e.terms)
                if (t.feature == name) {
                    ++hits;
                    break;
                }
        s += 100.0 * static_cast<double>(hits) / static_cast<double>(k);
    }
    return s / static_cast<double>(es.size());
}

}  // namespace detail

inline double fidelity(const Dataset& ds, const std::vector<std::size_t>& test,
                       ExplainOptions opts = {}) {
    detail::check_test_indices(ds, test);
    const Explainer ex(ds, opts);
    return detail::fidelity_impl(ex, detail::explain_all(ex, test), test);
}

inline double generality(const Dataset& ds, const std::vector<std::size_t>& test,
                         ExplainOptions opts = {}) {
    detail::check_test_indices(ds, test);
    const Explainer ex(ds, opts);
    return detail::generality_impl(ds, detail::explain_all(ex, test));
}

inline double simplicity(const Dataset& ds, const std::vector<std::size_t>& test,
                         ExplainOptions opts = {}) {
    detail::check_test_indices(ds, test);
    const Explainer ex(ds, opts);
    return detail::simplicity_impl(detail::explain_all(ex, test));
}

inline double robustness(const Dataset& ds, const std::vector<std::size_t>& test,
                         std::size_t k = 10, ExplainOptions opts = {}) {
    detail::check_test_indices(ds, test);
    const Explainer ex(ds, opts);
    return detail::robustness_impl(ex, detail::explain_all(ex, test), test, k);
}

inline CounterfactualFidelity counterfactual_fidelity(const Dataset& ds,
                                                      const std::vector<std::size_t>& test,
                                                      ExplainOptions opts = {}) {
    detail::check_test_indices(ds, test);
    const Explainer ex(ds, opts);
    return detail::counterfactual_fidelity_impl(ex, test);
}

inline double topk_recovery(const Dataset& ds, const std::vector<std::size_t>& test,
                            std::size_t k = 5, ExplainOptions opts = {}) {
    detail::check_test_indices(ds, test);
    const Explainer ex(ds, opts);
    return detail::topk_recovery_impl(ex, detail::explain_all(ex, test), k);
}

inline double topk_recovery(const Dataset& ds, std::size_t k = 5, ExplainOptions opts = {}) {
    return topk_recovery(ds, default_test_split(ds), k, opts);
}

/// Full harness over one table: every metric from a single explanation pass.
inline EvaluationReport evaluate(const Dataset& ds, const EvaluationOptions& opts = {}) {
    const std::vector<std::size_t> test =
        opts.test_indices ? *opts.test_indices : default_test_split(ds);
    detail::check_test_indices(ds, test);

    const Explainer ex(ds, opts.explain);
    const std::vector<Explanation> es = detail::explain_all(ex, test);

    EvaluationReport rep;
    rep.table_rows = ds.size();
    rep.test_indices = test;
    rep.fidelity_rmse = detail::fidelity_impl(ex, es, test);
    rep.generality_percent = detail::generality_impl(ds, es);
    rep.simplicity_mean = detail::simplicity_impl(es);
    rep.robustness_knn = opts.knn;
    rep.robustness_mean = detail::robustness_impl(ex, es, test, opts.knn);
    if (opts.with_counterfactual)
        rep.counterfactual = detail::counterfactual_fidelity_impl(ex, test);
    rep.top_k = opts.top_k;
    if (static_cast<std::size_t>(ex.encoded().values.cols()) >= opts.top_k)
        rep.topk_recovery_percent = detail::topk_recovery_impl(ex, es, opts.top_k);

    for (std::size_t k = 0; k < test.size(); ++k) {
        PerPointDetail d;
        d.row = test[k];
        d.target = ds.target(test[k]);
        d.predicted = es[k].predicted;
        d.neighborhood_size = es[k].neighborhood_size;
        d.r_lower = es[k].r_lower;
        d.term_count = es[k].terms.size();
        rep.per_point.push_back(d);
    }
    return rep;
}

inline nlohmann::ordered_json evaluation_to_json(const EvaluationReport& rep) {
    nlohmann::ordered_json j;
    j["table_rows"] = rep.table_rows;
    j["test_points"] = rep.test_indices.size();
    j["fidelity_rmse"] = rep.fidelity_rmse;
    j["generality_percent"] = rep.generality_percent;
    j["simplicity_mean"] = rep.simplicity_mean;
    j["robustness_mean"] = rep.robustness_mean;
    j["robustness_knn"] = rep.robustness_knn;
    if (rep.counterfactual.rmse)
        j["counterfactual_rmse"] = *rep.counterfactual.rmse;
    else
        j["counterfactual_rmse"] = nullptr;
    j["counterfactual_skipped"] = rep.counterfactual.skipped;
    j["counterfactual_attempts"] = rep.counterfactual.attempts;
    j["top_k"] = rep.top_k;
    if (rep.topk_recovery_percent)
        j["topk_recovery_percent"] = *rep.topk_recovery_percent;
    else
        j["topk_recovery_percent"] = nullptr;
    nlohmann::ordered_json pts = nlohmann::ordered_json::array();
    for (const PerPointDetail& d : rep.per_point) {
        nlohmann::ordered_json pj;
        pj["row"] = d.row;
        pj["target"] = d.target;
        pj["predicted"] = d.predicted;
        pj["neighborhood_size"] = d.neighborhood_size;
        pj["r_lower"] = d.r_lower;
        pj["terms"] = d.term_count;
        pts.push_back(std::move(pj));
    }
    j["per_point"] = std::move(pts);
    return j;
}

inline std::string render_evaluation_text(const EvaluationReport& rep) {
    auto line = [](const std::string& label, const std::string& value) {
        std::string out = label;
        out.append(label.size() < 22 ? 22 - label.size() : 1, ' ');
        return out + value + "\n";
    };
    std::string out;
    out += line("rows", std::to_string(rep.table_rows));
    out += line("test points", std::to_string(rep.test_indices.size()));
    out += line("fidelity rmse", detail::fixed4(rep.fidelity_rmse));
    out += line("generality", detail::fixed4(rep.generality_percent) + "%");
    out += line("simplicity", detail::fixed4(rep.simplicity_mean));
    out += line("robustness", detail::fixed4(rep.robustness_mean));
    std::string cf = rep.counterfactual.rmse ? detail::fixed4(*rep.counterfactual.rmse)
                                             : std::string("n/a");
    cf += " (skipped " + std::to_string(rep.counterfactual.skipped) + " of " +
          std::to_string(rep.counterfactual.attempts) + ")";
    out += line("counterfactual rmse", cf);
    out += line("top-" + std::to_string(rep.top_k) + " recovery",
                rep.topk_recovery_percent ? detail::fixed4(*rep.topk_recovery_percent) + "%"
                                          : std::string("n/a"));
    return out;
}

inline std::string render_evaluation(const EvaluationReport& rep, const std::string& format) {
    if (format == "text") return render_evaluation_text(rep);
    if (format == "structured") return evaluation_to_json(rep).dump(2) + "\n";
    throw std::invalid_argument("unknown output format '" + format + "'");
}

}  // namespace loclin
