#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <mutex>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "loclin/agreement.hpp"
#include "loclin/dataset.hpp"
#include "loclin/distance.hpp"
#include "loclin/parallel.hpp"
#include "loclin/surrogate.hpp"

namespace loclin {

struct ExplainOptions {
    double confidence = 0.95;
    double step_percent = 1.0;
};

namespace detail {

inline void validate_options(const ExplainOptions& o) {
    if (!(o.confidence > 0.0 && o.confidence < 1.0))
        throw std::invalid_argument("confidence must lie in (0,1)");
    if (!(o.step_percent > 0.0 && o.step_percent <= 100.0))
        throw std::invalid_argument("step percent must lie in (0,100]");
}

}  // namespace detail

/// Trace of the neighborhood-size search: one agreement score per
/// candidate size, the winning size and its trained model.
struct NeighborhoodScan {
    std::vector<std::size_t> candidate_sizes;  // ascending, last entry = |T|
    std::vector<AgreementScore> scores;        // aligned with candidate_sizes
    std::size_t best_size = 0;
    SurrogateModel best_model;
};

/// One line of an explanation: contribution = coefficient * value.
struct ExplanationTerm {
    std::string feature;
    double coefficient = 0.0;
    double value = 0.0;
    double contribution = 0.0;
};

/// A verifiable local explanation: predicted is exactly base_value plus the
/// sum of contributions in term order. Terms are ordered by descending
/// |contribution| with encoded-column order breaking ties.
struct Explanation {
    std::int64_t point_id = -1;  // row index, or -1 for an external point
    double base_value = 0.0;
    std::vector<ExplanationTerm> terms;
    double predicted = 0.0;
    std::size_t neighborhood_size = 0;
    double r_lower = 0.0;
    double confidence = 0.95;

    // not serialized: carried for downstream consumers
    SurrogateModel model;
    std::size_t applies_to = 0;  // neighborhood rows beyond the query itself
};

namespace detail {

/// Size search over a distance-ordered row block. Sizes run from
/// max(5, min(2·columns, n)) to n in `step` increments, n always included.
/// Candidates are scored independently (parallelizable) and reduced in
/// ascending-size order: strictly greater r_lower wins, a non-degenerate
/// score always beats a degenerate one, so ties keep the smallest size.
inline NeighborhoodScan scan_block(const Eigen::MatrixXd& Xs, const Eigen::VectorXd& ys,
                                   const std::vector<std::string>& names, std::size_t step,
                                   double confidence) {
    const std::size_t n = static_cast<std::size_t>(Xs.rows());
    if (n < 5)
        throw std::runtime_error("dataset smaller than the minimum fit size (5 rows)");
    if (step < 1) throw std::invalid_argument("step must be at least 1");

    const std::size_t p = static_cast<std::size_t>(Xs.cols());
    const std::size_t start = std::max<std::size_t>(5, std::min(2 * p, n));

    NeighborhoodScan scan;
    for (std::size_t i = start; i < n; i += step) scan.candidate_sizes.push_back(i);
    scan.candidate_sizes.push_back(n);

    const std::size_t m = scan.candidate_sizes.size();
    scan.scores.resize(m);
    std::vector<SurrogateModel> models(m);

    parallel_for(0, m, [&](std::size_t k) {
        const std::size_t size = scan.candidate_sizes[k];
        const Eigen::Index sz = static_cast<Eigen::Index>(size);
        SurrogateModel model = train_on_block(Xs.topRows(sz), names, ys.head(sz));
        std::vector<double> truth(ys.data(), ys.data() + size);
        std::vector<double> preds(size);
        for (std::size_t r = 0; r < size; ++r)
            preds[r] = model.predict(Xs.row(static_cast<Eigen::Index>(r)));
        scan.scores[k] = r_lower_bound(truth, preds, confidence);
        models[k] = std::move(model);
    });

    std::size_t best = 0;
    for (std::size_t k = 1; k < m; ++k) {
        const AgreementScore& cand = scan.scores[k];
        const AgreementScore& incumbent = scan.scores[best];
        const bool better = (!cand.degenerate && incumbent.degenerate) ||
                            (cand.degenerate == incumbent.degenerate &&
                             cand.r_lower > incumbent.r_lower);
        if (better) best = k;
    }
    scan.best_size = scan.candidate_sizes[best];
    scan.best_model = std::move(models[best]);
    return scan;
}

inline std::size_t step_from_percent(std::size_t n, double step_percent) {
    const auto s = static_cast<std::size_t>(
        std::lround(static_cast<double>(n) * step_percent / 100.0));
    return std::max<std::size_t>(1, s);
}

}  // namespace detail

/// Explains points of one dataset. Encoding, co-occurrence statistics and
/// per-row explanations are computed once and cached; all methods are safe
/// to call concurrently.
class Explainer {
public:
    explicit Explainer(const Dataset& ds, ExplainOptions opts = {})
        : ds_(ds), opts_(opts), enc_(encode(ds)), co_(ds) {
        detail::validate_options(opts_);
    }

    const Dataset& dataset() const { return ds_; }
    const EncodedMatrix& encoded() const { return enc_; }
    const CoOccurrenceModel& cooccurrence() const { return co_; }
    const ExplainOptions& options() const { return opts_; }

    /// Distance-ordered view of the table as seen from `x`.
    std::vector<Neighbor> distances(const DataPoint& x) const {
        return compute_distances(ds_, co_, x);
    }

    Explanation explain_row(std::size_t row) const {
        if (row >= ds_.size())
            throw std::invalid_argument("row index " + std::to_string(row) +
                                        " out of range (dataset has " +
                                        std::to_string(ds_.size()) + " rows)");
        {
            std::lock_guard<std::mutex> lock(mu_);
            auto it = cache_.find(row);
            if (it != cache_.end()) return it->second;
        }
        Explanation e = explain_impl(ds_.row(row), static_cast<std::int64_t>(row));
        std::lock_guard<std::mutex> lock(mu_);
        return cache_.try_emplace(row, std::move(e)).first->second;
    }

    /// Explains an external point; numeric entries must already be in the
    /// dataset's standardized units (see Dataset::standardize_value).
    Explanation explain_point(const DataPoint& x) const { return explain_impl(x, -1); }

private:
    Explanation explain_impl(const DataPoint& x, std::int64_t point_id) const {
        const std::vector<Neighbor> dist = compute_distances(ds_, co_, x);
        const std::size_t n = dist.size();
        const Eigen::Index p = enc_.values.cols();

        Eigen::MatrixXd Xs(static_cast<Eigen::Index>(n), p);
        Eigen::VectorXd ys(static_cast<Eigen::Index>(n));
        for (std::size_t k = 0; k < n; ++k) {
            Xs.row(static_cast<Eigen::Index>(k)) =
                enc_.values.row(static_cast<Eigen::Index>(dist[k].row));
            ys(static_cast<Eigen::Index>(k)) = ds_.target(dist[k].row);
        }

        const std::size_t step = detail::step_from_percent(n, opts_.step_percent);
        NeighborhoodScan scan =
            detail::scan_block(Xs, ys, enc_.column_names, step, opts_.confidence);

        const auto it = std::find(scan.candidate_sizes.begin(), scan.candidate_sizes.end(),
                                  scan.best_size);
        const std::size_t best_index =
            static_cast<std::size_t>(it - scan.candidate_sizes.begin());

        Explanation e;
        e.point_id = point_id;
        e.confidence = opts_.confidence;
        e.neighborhood_size = scan.best_size;
        e.r_lower = scan.scores[best_index].r_lower;
        e.base_value = scan.best_model.intercept;
        e.applies_to = point_id >= 0 ? scan.best_size - 1 : scan.best_size;

        const Eigen::RowVectorXd xe = encode_point(ds_, x);
        for (std::size_t k = 0; k < scan.best_model.selected.size(); ++k) {
            ExplanationTerm t;
            t.feature = scan.best_model.selected_names[k];
            t.coefficient = scan.best_model.coefficients[k];
            t.value = xe(static_cast<Eigen::Index>(scan.best_model.selected[k]));
            t.contribution = t.coefficient * t.value;
            e.terms.push_back(std::move(t));
        }
        std::stable_sort(e.terms.begin(), e.terms.end(),
                         [](const ExplanationTerm& a, const ExplanationTerm& b) {
                             return std::abs(a.contribution) > std::abs(b.contribution);
                         });
        e.predicted = e.base_value;
        for (const auto& t : e.terms) e.predicted += t.contribution;

        e.model = std::move(scan.best_model);
        return e;
    }

    const Dataset& ds_;
    ExplainOptions opts_;
    EncodedMatrix enc_;
    CoOccurrenceModel co_;
    mutable std::mutex mu_;
    mutable std::unordered_map<std::size_t, Explanation> cache_;
};

/// Standalone size search from a precomputed distance ordering.
inline NeighborhoodScan optimal_neighborhood_search(const Dataset& ds,
                                                    const std::vector<Neighbor>& d,
                                                    std::size_t step, double confidence) {
    if (d.size() != ds.size())
        throw std::invalid_argument("distance vector does not cover the dataset");
    EncodedMatrix enc = encode(ds);
    const std::size_t n = d.size();
    Eigen::MatrixXd Xs(static_cast<Eigen::Index>(n), enc.values.cols());
    Eigen::VectorXd ys(static_cast<Eigen::Index>(n));
    for (std::size_t k = 0; k < n; ++k) {
        Xs.row(static_cast<Eigen::Index>(k)) =
            enc.values.row(static_cast<Eigen::Index>(d[k].row));
        ys(static_cast<Eigen::Index>(k)) = ds.target(d[k].row);
    }
    return detail::scan_block(Xs, ys, enc.column_names, step, confidence);
}

inline Explanation explain(const Dataset& ds, std::size_t row, ExplainOptions opts = {}) {
    return Explainer(ds, opts).explain_row(row);
}

inline Explanation explain(const Dataset& ds, const DataPoint& x, ExplainOptions opts = {}) {
    return Explainer(ds, opts).explain_point(x);
}

namespace detail {

inline std::string fixed4(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

}  // namespace detail

/// Line-oriented rendering: base value, one signed contribution bar per
/// term (40-char bars scaled to the largest |contribution|), the total,
/// and the neighbor count the formula applies to.
inline std::string render_explanation_text(const Explanation& e) {
    std::string out = "base value: " + detail::fixed4(e.base_value) + "\n";

    std::size_t name_width = 0;
    double max_abs = 0.0;
    for (const auto& t : e.terms) {
        name_width = std::max(name_width, t.feature.size());
        max_abs = std::max(max_abs, std::abs(t.contribution));
    }
    for (const auto& t : e.terms) {
        const int bar_len =
            max_abs > 0.0
                ? static_cast<int>(std::lround(40.0 * std::abs(t.contribution) / max_abs))
                : 0;
        out += t.feature;
        out.append(name_width - t.feature.size() + 2, ' ');
        out += t.contribution < 0.0 ? '-' : '+';
        out.append(static_cast<std::size_t>(bar_len), '#');
        out += ' ';
        out += detail::fixed4(t.contribution);
        out += '\n';
    }
    out += "total: " + detail::fixed4(e.predicted) + "\n";
    out += "applies to " + std::to_string(e.applies_to) + " neighbors\n";
    return out;
}

/// Structured rendering with the stable field schema.
inline nlohmann::ordered_json explanation_to_json(const Explanation& e) {
    nlohmann::ordered_json j;
    j["point_id"] = e.point_id;
    j["base_value"] = e.base_value;
    nlohmann::ordered_json terms = nlohmann::ordered_json::array();
    for (const auto& t : e.terms) {
        nlohmann::ordered_json tj;
        tj["feature"] = t.feature;
        tj["coefficient"] = t.coefficient;
        tj["value"] = t.value;
        tj["contribution"] = t.contribution;
        terms.push_back(std::move(tj));
    }
    j["terms"] = std::move(terms);
    j["predicted"] = e.predicted;
    j["neighborhood_size"] = e.neighborhood_size;
    j["r_lower"] = e.r_lower;
    j["confidence"] = e.confidence;
    return j;
}

inline std::string render_explanation(const Explanation& e, const std::string& format) {
    if (format == "text") return render_explanation_text(e);
    if (format == "structured") return explanation_to_json(e).dump(2) + "\n";
    throw std::invalid_argument("unknown output format '" + format + "'");
}

}  // namespace loclin
