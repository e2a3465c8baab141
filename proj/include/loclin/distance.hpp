#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "loclin/dataset.hpp"

namespace loclin {

/// L1 distance over (standardized) numeric coordinates.
inline double numeric_distance(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw std::invalid_argument("numeric_distance: length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
    return s;
}

/// Hamming distance on one binary coordinate: 0 when equal, 1 otherwise.
inline int binary_distance(int a, int b) {
    if ((a != 0 && a != 1) || (b != 0 && b != 1))
        throw std::invalid_argument("binary_distance: input outside {0,1}");
    return a == b ? 0 : 1;
}

inline int binary_distance(const std::vector<int>& a, const std::vector<int>& b) {
    if (a.size() != b.size()) throw std::invalid_argument("binary_distance: length mismatch");
    int s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += binary_distance(a[i], b[i]);
    return s;
}

/// Co-occurrence statistics for categorical attributes. For each categorical
/// attribute, every other categorical attribute and every binary attribute
/// serves as a context; conditional value distributions are raw empirical
/// frequencies (no smoothing). The model is immutable once built.
class CoOccurrenceModel {
public:
    explicit CoOccurrenceModel(const Dataset& ds) { build(ds); }

    std::size_t attribute_count() const { return labels_.size(); }

    const std::vector<std::string>& labels(std::size_t attr) const { return labels_.at(attr); }

    /// Number of context attributes used for categorical attribute `attr`.
    std::size_t context_count(std::size_t attr) const { return cond_.at(attr).size(); }

    /// Number of distinct values of context `ctx` of attribute `attr`
    /// (binaries always contribute the two values 0 and 1).
    std::size_t context_cardinality(std::size_t attr, std::size_t ctx) const {
        return card_.at(attr).at(ctx);
    }

    /// P(context ctx takes its value #v | attr takes its label #label).
    double conditional(std::size_t attr, std::size_t ctx, std::size_t label,
                       std::size_t v) const {
        const std::size_t k = card_.at(attr).at(ctx);
        return cond_.at(attr).at(ctx).at(label * k + v);
    }

    /// Per-context delta between two labels of `attr`: the greedy value set
    /// ω = {v : P(v|x) ≥ P(v|y)} realizes P(ω|x) + P(ω̄|y) − 1, computed as
    /// the sum of positive probability differences in ascending value order.
    double pair_delta(std::size_t attr, std::size_t ctx, const std::string& x,
                      const std::string& y) const {
        return pair_delta_by_index(attr, ctx, label_index(attr, x), label_index(attr, y));
    }

    /// Distance between two labels of `attr`: mean of pair_delta over all
    /// contexts. With no context attributes at all this degrades to the
    /// 0/1 indicator.
    double value_distance(std::size_t attr, const std::string& x, const std::string& y) const {
        const std::size_t ix = label_index(attr, x);
        const std::size_t iy = label_index(attr, y);
        const std::size_t n = labels_.at(attr).size();
        return dist_.at(attr)[ix * n + iy];
    }

private:
    std::size_t label_index(std::size_t attr, const std::string& label) const {
        if (attr >= labels_.size())
            throw std::invalid_argument("no categorical attribute " + std::to_string(attr));
        const auto& m = label_index_[attr];
        auto it = m.find(label);
        if (it == m.end())
            throw std::invalid_argument("unseen label '" + label + "' for categorical attribute " +
                                        std::to_string(attr));
        return it->second;
    }

    double pair_delta_by_index(std::size_t attr, std::size_t ctx, std::size_t ix,
                               std::size_t iy) const {
        const std::size_t k = card_.at(attr).at(ctx);
        const std::vector<double>& table = cond_.at(attr).at(ctx);
        double s = 0.0;
        for (std::size_t v = 0; v < k; ++v) {
            double d = table[ix * k + v] - table[iy * k + v];
            if (d > 0.0) s += d;
        }
        return std::min(s, 1.0);
    }

    void build(const Dataset& ds) {
        const auto& schema = ds.schema();
        const std::size_t mc = schema.categorical_count();
        const std::size_t mb = schema.binary_count();

        labels_.resize(mc);
        label_index_.resize(mc);
        for (std::size_t c = 0; c < mc; ++c) {
            labels_[c] = ds.categories(c);
            for (std::size_t i = 0; i < labels_[c].size(); ++i) label_index_[c][labels_[c][i]] = i;
        }

        // context order per attribute: other categoricals ascending, then binaries ascending
        cond_.resize(mc);
        card_.resize(mc);
        std::vector<std::vector<std::size_t>> ctx_cat(mc);  // context -> categorical offset
        for (std::size_t c = 0; c < mc; ++c) {
            for (std::size_t o = 0; o < mc; ++o) {
                if (o == c) continue;
                ctx_cat[c].push_back(o);
                card_[c].push_back(labels_[o].size());
            }
            for (std::size_t b = 0; b < mb; ++b) card_[c].push_back(2);
            const std::size_t L = labels_[c].size();
            for (std::size_t t = 0; t < card_[c].size(); ++t)
                cond_[c].emplace_back(L * card_[c][t], 0.0);
        }

        std::vector<std::vector<double>> label_counts(mc);
        for (std::size_t c = 0; c < mc; ++c) label_counts[c].assign(labels_[c].size(), 0.0);

        for (std::size_t r = 0; r < ds.size(); ++r) {
            const DataPoint& p = ds.row(r);
            for (std::size_t c = 0; c < mc; ++c) {
                const std::size_t lx = label_index_[c].at(p.categorical[c]);
                label_counts[c][lx] += 1.0;
                const std::size_t n_cat_ctx = ctx_cat[c].size();
                for (std::size_t t = 0; t < n_cat_ctx; ++t) {
                    const std::size_t o = ctx_cat[c][t];
                    const std::size_t v = label_index_[o].at(p.categorical[o]);
                    cond_[c][t][lx * card_[c][t] + v] += 1.0;
                }
                for (std::size_t b = 0; b < mb; ++b) {
                    const std::size_t t = n_cat_ctx + b;
                    cond_[c][t][lx * 2 + static_cast<std::size_t>(p.binary[b])] += 1.0;
                }
            }
        }

        for (std::size_t c = 0; c < mc; ++c)
            for (std::size_t t = 0; t < cond_[c].size(); ++t) {
                const std::size_t k = card_[c][t];
                for (std::size_t lx = 0; lx < labels_[c].size(); ++lx)
                    for (std::size_t v = 0; v < k; ++v)
                        cond_[c][t][lx * k + v] /= label_counts[c][lx];
            }

        // cache label-pair distances; mirror the upper triangle so lookups
        // are exactly symmetric
        dist_.resize(mc);
        for (std::size_t c = 0; c < mc; ++c) {
            const std::size_t L = labels_[c].size();
            dist_[c].assign(L * L, 0.0);
            const std::size_t nctx = cond_[c].size();
            for (std::size_t ix = 0; ix < L; ++ix)
                for (std::size_t iy = ix + 1; iy < L; ++iy) {
                    double d;
                    if (nctx == 0) {
                        d = 1.0;
                    } else {
                        double s = 0.0;
                        for (std::size_t t = 0; t < nctx; ++t)
                            s += pair_delta_by_index(c, t, ix, iy);
                        d = s / static_cast<double>(nctx);
                    }
                    dist_[c][ix * L + iy] = d;
                    dist_[c][iy * L + ix] = d;
                }
        }
    }

    std::vector<std::vector<std::string>> labels_;
    std::vector<std::unordered_map<std::string, std::size_t>> label_index_;
    std::vector<std::vector<std::vector<double>>> cond_;  // [attr][ctx] -> L x K table
    std::vector<std::vector<std::size_t>> card_;          // [attr][ctx] -> K
    std::vector<std::vector<double>> dist_;               // [attr] -> L x L matrix
};

inline double categorical_value_distance(const CoOccurrenceModel& model, std::size_t attr,
                                          const std::string& x, const std::string& y) {
    return model.value_distance(attr, x, y);
}

namespace detail {

inline double distance_unchecked(const CoOccurrenceModel& model, const DataPoint& a,
                                 const DataPoint& b) {
    double s = numeric_distance(a.numeric, b.numeric);
    for (std::size_t c = 0; c < a.categorical.size(); ++c)
        s += model.value_distance(c, a.categorical[c], b.categorical[c]);
    s += binary_distance(a.binary, b.binary);
    return s;
}

}  // namespace detail

/// Mixed-type distance: L1 over numerics + co-occurrence distance per
/// categorical + Hamming per binary, summed without weighting.
inline double generalized_distance(const Dataset& ds, const CoOccurrenceModel& model,
                                   const DataPoint& a, const DataPoint& b) {
    ds.validate_point(a);
    ds.validate_point(b);
    return detail::distance_unchecked(model, a, b);
}

struct Neighbor {
    std::size_t row;
    double distance;
};

/// Distances from a query point to every row, ascending, ties broken by
/// ascending row index. The order is total and deterministic.
inline std::vector<Neighbor> compute_distances(const Dataset& ds, const CoOccurrenceModel& model,
                                               const DataPoint& query) {
    ds.validate_point(query);
    std::vector<Neighbor> out;
    out.reserve(ds.size());
    for (std::size_t r = 0; r < ds.size(); ++r)
        out.push_back({r, detail::distance_unchecked(model, query, ds.row(r))});
    std::sort(out.begin(), out.end(), [](const Neighbor& a, const Neighbor& b) {
        if (a.distance != b.distance) return a.distance < b.distance;
        return a.row < b.row;
    });
    return out;
}

}  // namespace loclin
