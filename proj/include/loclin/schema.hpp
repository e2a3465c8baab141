#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

namespace loclin {

enum class FeatureKind { Numeric, Categorical, Binary };

inline const char* to_string(FeatureKind k) {
    switch (k) {
        case FeatureKind::Numeric: return "numeric";
        case FeatureKind::Categorical: return "categorical";
        case FeatureKind::Binary: return "binary";
    }
    return "?";
}

inline FeatureKind feature_kind_from_string(const std::string& s) {
    if (s == "numeric") return FeatureKind::Numeric;
    if (s == "categorical") return FeatureKind::Categorical;
    if (s == "binary") return FeatureKind::Binary;
    throw std::invalid_argument("unknown feature kind '" + s +
                                "' (expected numeric, categorical or binary)");
}

struct FeatureSpec {
    std::string name;
    FeatureKind kind;
};

/// Declares the column layout of a table: one kind per feature plus the
/// name of the target column. Feature names must be unique and distinct
/// from the target.
class FeatureSchema {
public:
    FeatureSchema() = default;

    FeatureSchema(std::vector<FeatureSpec> features, std::string target)
        : features_(std::move(features)), target_(std::move(target)) {
        std::unordered_set<std::string> seen;
        for (const auto& f : features_) {
            if (f.name == target_)
                throw std::invalid_argument("feature '" + f.name +
                                            "' collides with the target column");
            if (!seen.insert(f.name).second)
                throw std::invalid_argument("duplicate feature name '" + f.name + "'");
        }
        // within-kind position of each feature, in schema order
        std::size_t counts[3] = {0, 0, 0};
        kind_offsets_.reserve(features_.size());
        for (const auto& f : features_)
            kind_offsets_.push_back(counts[static_cast<int>(f.kind)]++);
        counts_[0] = counts[0];
        counts_[1] = counts[1];
        counts_[2] = counts[2];
    }

    const std::vector<FeatureSpec>& features() const { return features_; }
    const std::string& target() const { return target_; }
    std::size_t size() const { return features_.size(); }

    std::size_t count(FeatureKind k) const { return counts_[static_cast<int>(k)]; }
    std::size_t numeric_count() const { return count(FeatureKind::Numeric); }
    std::size_t categorical_count() const { return count(FeatureKind::Categorical); }
    std::size_t binary_count() const { return count(FeatureKind::Binary); }

    /// Position of feature `i` among features of its own kind.
    std::size_t kind_offset(std::size_t i) const { return kind_offsets_.at(i); }

    std::size_t index_of(const std::string& name) const {
        for (std::size_t i = 0; i < features_.size(); ++i)
            if (features_[i].name == name) return i;
        throw std::invalid_argument("unknown feature '" + name + "'");
    }

    bool has_feature(const std::string& name) const {
        for (const auto& f : features_)
            if (f.name == name) return true;
        return false;
    }

private:
    std::vector<FeatureSpec> features_;
    std::string target_;
    std::vector<std::size_t> kind_offsets_;
    std::size_t counts_[3] = {0, 0, 0};
};

}  // namespace loclin
