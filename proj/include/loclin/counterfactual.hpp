#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "loclin/dataset.hpp"
#include "loclin/distance.hpp"
#include "loclin/explainer.hpp"
#include "loclin/parallel.hpp"

namespace loclin {

/// No table row's target falls inside the epsilon band.
class CandidateNotFound : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Every candidate already matches the point on all explaining features.
class CounterfactualInconsistent : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CounterfactualQuery {
    DataPoint point;
    double reference_value = 0.0;
    std::optional<double> epsilon;              // default: 5% of |reference_value|
    std::optional<std::size_t> max_candidates;  // evaluate only the nearest K
};

using FeatureValue = std::variant<double, std::string, int>;

struct FeatureChange {
    std::string feature;
    FeatureValue old_value;
    FeatureValue new_value;
};

/// The winning modification: `modified` differs from `original` exactly on
/// `changes`, and `objective` = distance_to_candidate +
/// distance_to_modified / |changes|.
struct CounterfactualExplanation {
    DataPoint original;
    DataPoint modified;
    std::vector<FeatureChange> changes;  // schema order, real differences only
    std::size_t candidate_row = 0;
    Explanation candidate_explanation;
    double objective = 0.0;
    double distance_to_candidate = 0.0;
    double distance_to_modified = 0.0;
    double predicted_at_modified = 0.0;
    double reference_value = 0.0;
    double epsilon = 0.0;            // resolved band half-width
    bool epsilon_from_range = false; // 5%-of-range fallback for reference 0
};

struct CounterfactualReport {
    double predicted_at_modified = 0.0;
    double deviation_from_reference = 0.0;
};

namespace detail {

struct ResolvedEpsilon {
    double value;
    bool from_range;
};

inline ResolvedEpsilon resolve_epsilon(const Dataset& ds, const CounterfactualQuery& q) {
    if (q.epsilon) {
        if (!(*q.epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
        return {*q.epsilon, false};
    }
    if (q.reference_value != 0.0) return {0.05 * std::abs(q.reference_value), false};
    const auto& t = ds.targets();
    const auto [lo, hi] = std::minmax_element(t.begin(), t.end());
    const double span = *hi - *lo;
    if (span <= 0.0)
        throw std::invalid_argument(
            "cannot derive a default epsilon for reference value 0 on a constant target; "
            "pass epsilon explicitly");
    return {0.05 * span, true};
}

/// Rows whose target lies in [ref - eps, ref + eps], nearest first.
inline std::vector<Neighbor> band_candidates(const Dataset& ds, const CoOccurrenceModel& co,
                                             const CounterfactualQuery& q, double eps) {
    if (q.max_candidates && *q.max_candidates == 0)
        throw std::invalid_argument("max candidates must be positive");
    std::vector<Neighbor> out;
    for (const Neighbor& nb : compute_distances(ds, co, q.point)) {
        const double y = ds.target(nb.row);
        if (y >= q.reference_value - eps && y <= q.reference_value + eps) out.push_back(nb);
    }
    if (out.empty())
        throw CandidateNotFound("no candidate within epsilon " + std::to_string(eps) +
                                " of reference value " + std::to_string(q.reference_value) +
                                "; try a larger epsilon");
    if (q.max_candidates && out.size() > *q.max_candidates) out.resize(*q.max_candidates);
    return out;
}

}  // namespace detail

inline std::vector<std::size_t> find_candidates(const Dataset& ds,
                                                const CounterfactualQuery& q) {
    const CoOccurrenceModel co(ds);
    const detail::ResolvedEpsilon eps = detail::resolve_epsilon(ds, q);
    std::vector<std::size_t> rows;
    for (const Neighbor& nb : detail::band_candidates(ds, co, q, eps.value))
        rows.push_back(nb.row);
    return rows;
}

/// Explains every candidate row, copies the source features behind each
/// candidate's selected columns into the query point, and keeps the
/// modification minimizing d(x, candidate) + d(x, modified)/|changes|.
/// Ties fall to the smaller candidate distance, then the lower row index.
inline CounterfactualExplanation counterfactual(const Explainer& ex,
                                                const CounterfactualQuery& q) {
    const Dataset& ds = ex.dataset();
    const detail::ResolvedEpsilon eps = detail::resolve_epsilon(ds, q);
    const std::vector<Neighbor> cands =
        detail::band_candidates(ds, ex.cooccurrence(), q, eps.value);

    std::unordered_map<std::string, std::size_t> col_origin;
    for (std::size_t c = 0; c < ex.encoded().column_names.size(); ++c)
        col_origin.emplace(ex.encoded().column_names[c], ex.encoded().origin[c]);

    struct Scored {
        bool usable = false;
        CounterfactualExplanation ce;
    };
    std::vector<Scored> slots(cands.size());

    parallel_for(std::size_t{0}, cands.size(), [&](std::size_t k) {
        const std::size_t row = cands[k].row;
        Explanation e = ex.explain_row(row);

        std::vector<std::size_t> feats;  // source features, deduped one-hot
        for (const auto& t : e.terms) feats.push_back(col_origin.at(t.feature));
        std::sort(feats.begin(), feats.end());
        feats.erase(std::unique(feats.begin(), feats.end()), feats.end());

        const DataPoint& cand = ds.row(row);
        DataPoint mod = q.point;
        std::vector<FeatureChange> changes;
        for (std::size_t f : feats) {
            const FeatureSpec& spec = ds.schema().features()[f];
            const std::size_t o = ds.schema().kind_offset(f);
            switch (spec.kind) {
                case FeatureKind::Numeric:
                    if (mod.numeric[o] != cand.numeric[o]) {
                        changes.push_back({spec.name, mod.numeric[o], cand.numeric[o]});
                        mod.numeric[o] = cand.numeric[o];
                    }
                    break;
                case FeatureKind::Categorical:
                    if (mod.categorical[o] != cand.categorical[o]) {
                        changes.push_back({spec.name, mod.categorical[o], cand.categorical[o]});
                        mod.categorical[o] = cand.categorical[o];
                    }
                    break;
                case FeatureKind::Binary:
                    if (mod.binary[o] != cand.binary[o]) {
                        changes.push_back({spec.name, mod.binary[o], cand.binary[o]});
                        mod.binary[o] = cand.binary[o];
                    }
                    break;
            }
        }
        if (changes.empty()) return;  // reference reachable as-is: not a counterfactual

        CounterfactualExplanation ce;
        ce.original = q.point;
        ce.modified = std::move(mod);
        ce.changes = std::move(changes);
        ce.candidate_row = row;
        ce.distance_to_candidate = cands[k].distance;
        ce.distance_to_modified =
            generalized_distance(ds, ex.cooccurrence(), q.point, ce.modified);
        ce.objective = ce.distance_to_candidate +
                       ce.distance_to_modified / static_cast<double>(ce.changes.size());
        ce.predicted_at_modified = e.model.predict(encode_point(ds, ce.modified));
        ce.reference_value = q.reference_value;
        ce.epsilon = eps.value;
        ce.epsilon_from_range = eps.from_range;
        ce.candidate_explanation = std::move(e);
        slots[k].ce = std::move(ce);
        slots[k].usable = true;
    });

    Scored* best = nullptr;
    for (Scored& s : slots) {
        if (!s.usable) continue;
        if (!best) {
            best = &s;
            continue;
        }
        const CounterfactualExplanation& a = s.ce;
        const CounterfactualExplanation& b = best->ce;
        const bool wins =
            a.objective < b.objective ||
            (a.objective == b.objective &&
             (a.distance_to_candidate < b.distance_to_candidate ||
              (a.distance_to_candidate == b.distance_to_candidate &&
               a.candidate_row < b.candidate_row)));
        if (wins) best = &s;
    }
    if (!best)
        throw CounterfactualInconsistent(
            "reference reachable without change is inconsistent: every candidate already "
            "matches the point on all explaining features");
    return std::move(best->ce);
}

inline CounterfactualExplanation counterfactual(const Dataset& ds,
                                                const CounterfactualQuery& q,
                                                ExplainOptions opts = {}) {
    return counterfactual(Explainer(ds, opts), q);
}

/// Re-evaluates the winning candidate's surrogate at the modified point.
inline CounterfactualReport verify_counterfactual(const Dataset& ds,
                                                  const CounterfactualExplanation& ce,
                                                  const CounterfactualQuery& q) {
    CounterfactualReport r;
    r.predicted_at_modified =
        ce.candidate_explanation.model.predict(encode_point(ds, ce.modified));
    r.deviation_from_reference = std::abs(r.predicted_at_modified - q.reference_value);
    return r;
}

namespace detail {

inline nlohmann::ordered_json feature_value_json(const FeatureValue& v) {
    if (const double* d = std::get_if<double>(&v)) return *d;
    if (const std::string* s = std::get_if<std::string>(&v)) return *s;
    return std::get<int>(v);
}

inline std::string feature_value_text(const FeatureValue& v) {
    if (const double* d = std::get_if<double>(&v)) return fixed4(*d);
    if (const std::string* s = std::get_if<std::string>(&v)) return *s;
    return std::to_string(std::get<int>(v));
}

}  // namespace detail

inline nlohmann::ordered_json counterfactual_to_json(const CounterfactualExplanation& ce) {
    nlohmann::ordered_json j;
    j["reference_value"] = ce.reference_value;
    j["epsilon"] = ce.epsilon;
    j["candidate_row"] = ce.candidate_row;
    nlohmann::ordered_json changes = nlohmann::ordered_json::array();
    for (const auto& c : ce.changes) {
        nlohmann::ordered_json cj;
        cj["feature"] = c.feature;
        cj["old"] = detail::feature_value_json(c.old_value);
        cj["new"] = detail::feature_value_json(c.new_value);
        changes.push_back(std::move(cj));
    }
    j["changes"] = std::move(changes);
    j["objective"] = ce.objective;
    j["predicted_at_modified"] = ce.predicted_at_modified;
    return j;
}

inline std::string render_counterfactual_text(const CounterfactualExplanation& ce) {
    std::string out = "reference value: " + detail::fixed4(ce.reference_value) +
                      " (epsilon " + detail::fixed4(ce.epsilon);
    if (ce.epsilon_from_range) out += ", from target range";
    out += ")\n";
    out += "candidate row: " + std::to_string(ce.candidate_row) + "\n";
    for (const auto& c : ce.changes)
        out += "change " + c.feature + ": " + detail::feature_value_text(c.old_value) +
               " -> " + detail::feature_value_text(c.new_value) + "\n";
    out += "objective: " + detail::fixed4(ce.objective) + "\n";
    out += "predicted at modified point: " + detail::fixed4(ce.predicted_at_modified) + "\n";
    return out;
}

inline std::string render_counterfactual(const CounterfactualExplanation& ce,
                                         const std::string& format) {
    if (format == "text") return render_counterfactual_text(ce);
    if (format == "structured") return counterfactual_to_json(ce).dump(2) + "\n";
    throw std::invalid_argument("unknown output format '" + format + "'");
}

}  // namespace loclin
