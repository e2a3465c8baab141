#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "loclin/schema.hpp"

namespace loclin {

/// One row of a table, grouped by feature kind. Numeric values are held in
/// standardized units once the point lives inside a Dataset.
struct DataPoint {
    std::vector<double> numeric;
    std::vector<std::string> categorical;
    std::vector<int> binary;
};

/// Per-numeric-feature standardization parameters. `stddev` is the
/// population standard deviation of the source column; zero-variance
/// columns record 0 and standardize to all zeros.
struct Standardization {
    double mean = 0.0;
    double stddev = 0.0;
};

namespace detail {

inline bool parse_double(const std::string& cell, double& out) {
    const char* b = cell.data();
    const char* e = b + cell.size();
    while (b < e && (*b == ' ' || *b == '\t')) ++b;
    while (e > b && (e[-1] == ' ' || e[-1] == '\t')) --e;
    if (b == e) return false;
    auto [ptr, ec] = std::from_chars(b, e, out);
    return ec == std::errc() && ptr == e;
}

inline std::string trimmed(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

/// Minimal RFC-4180 reader: quoted fields, doubled-quote escapes, CRLF or
/// LF record ends, embedded newlines inside quotes.
inline std::vector<std::vector<std::string>> read_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file '" + path + "'");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    std::vector<std::vector<std::string>> records;
    std::vector<std::string> record;
    std::string field;
    bool quoted = false;
    bool field_started = false;

    auto end_field = [&] {
        record.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    auto end_record = [&] {
        end_field();
        records.push_back(std::move(record));
        record.clear();
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
        } else if (c == '"' && !field_started) {
            quoted = true;
            field_started = true;
        } else if (c == ',') {
            end_field();
        } else if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') {
            end_record();
            ++i;
        } else if (c == '\n') {
            end_record();
        } else {
            field += c;
            field_started = true;
        }
    }
    if (quoted) throw std::runtime_error("malformed CSV: unterminated quote in '" + path + "'");
    if (field_started || !field.empty() || !record.empty()) end_record();
    return records;
}

}  // namespace detail

/// Immutable standardized table: the sole training substrate. Rows hold
/// standardized numerics, raw category labels and 0/1 binaries; targets
/// are kept as-is.
class Dataset {
public:
    /// Builds a dataset from raw (unstandardized) rows. Numeric columns are
    /// standardized to mean 0 / population std 1; zero-variance columns
    /// become all zeros with stddev recorded as 0.
    Dataset(FeatureSchema schema, std::vector<DataPoint> raw_rows, std::vector<double> targets)
        : schema_(std::move(schema)), rows_(std::move(raw_rows)), targets_(std::move(targets)) {
        if (rows_.empty()) throw std::runtime_error("empty dataset: no data rows");
        if (rows_.size() != targets_.size())
            throw std::invalid_argument("row/target count mismatch");

        const std::size_t mn = schema_.numeric_count();
        const std::size_t mc = schema_.categorical_count();
        const std::size_t mb = schema_.binary_count();
        for (std::size_t r = 0; r < rows_.size(); ++r) {
            const DataPoint& p = rows_[r];
            if (p.numeric.size() != mn || p.categorical.size() != mc || p.binary.size() != mb)
                throw std::invalid_argument("row " + std::to_string(r) +
                                            " does not match the schema arity");
            for (int b : p.binary)
                if (b != 0 && b != 1)
                    throw std::invalid_argument("row " + std::to_string(r) +
                                                ": binary value outside {0,1}");
        }

        standardize_numerics();
        index_categories();
    }

    const FeatureSchema& schema() const { return schema_; }
    std::size_t size() const { return rows_.size(); }
    const std::vector<DataPoint>& rows() const { return rows_; }
    const DataPoint& row(std::size_t i) const { return rows_.at(i); }
    const std::vector<double>& targets() const { return targets_; }
    double target(std::size_t i) const { return targets_.at(i); }
    const std::vector<Standardization>& standardization() const { return standardization_; }

    /// Observed labels of categorical feature `c` (kind offset), in
    /// first-appearance order.
    const std::vector<std::string>& categories(std::size_t c) const { return categories_.at(c); }

    std::optional<std::size_t> category_index(std::size_t c, const std::string& label) const {
        const auto& m = category_index_.at(c);
        auto it = m.find(label);
        if (it == m.end()) return std::nullopt;
        return it->second;
    }

    double standardize_value(std::size_t numeric_idx, double raw) const {
        const auto& s = standardization_.at(numeric_idx);
        return s.stddev > 0.0 ? (raw - s.mean) / s.stddev : 0.0;
    }

    double destandardize_value(std::size_t numeric_idx, double standardized) const {
        const auto& s = standardization_.at(numeric_idx);
        return standardized * s.stddev + s.mean;
    }

    /// Checks an externally supplied point against the schema: arity, known
    /// category labels, 0/1 binaries. Throws on violation.
    void validate_point(const DataPoint& p) const {
        if (p.numeric.size() != schema_.numeric_count() ||
            p.categorical.size() != schema_.categorical_count() ||
            p.binary.size() != schema_.binary_count())
            throw std::invalid_argument("data point does not match the schema arity");
        for (std::size_t c = 0; c < p.categorical.size(); ++c)
            if (!category_index(c, p.categorical[c]))
                throw std::invalid_argument("unseen label '" + p.categorical[c] +
                                            "' for categorical feature " + std::to_string(c));
        for (int b : p.binary)
            if (b != 0 && b != 1) throw std::invalid_argument("binary value outside {0,1}");
    }

private:
    void standardize_numerics() {
        const std::size_t mn = schema_.numeric_count();
        const std::size_t n = rows_.size();
        standardization_.assign(mn, {});
        for (std::size_t j = 0; j < mn; ++j) {
            double mean = 0.0;
            for (const auto& p : rows_) mean += p.numeric[j];
            mean /= static_cast<double>(n);
            double var = 0.0;
            for (const auto& p : rows_) {
                double d = p.numeric[j] - mean;
                var += d * d;
            }
            var /= static_cast<double>(n);
            double sd = std::sqrt(var);
            standardization_[j] = {mean, sd};
            for (auto& p : rows_)
                p.numeric[j] = sd > 0.0 ? (p.numeric[j] - mean) / sd : 0.0;
        }
    }

    void index_categories() {
        const std::size_t mc = schema_.categorical_count();
        categories_.assign(mc, {});
        category_index_.assign(mc, {});
        for (const auto& p : rows_) {
            for (std::size_t c = 0; c < mc; ++c) {
                const std::string& label = p.categorical[c];
                if (label.empty())
                    throw std::runtime_error("missing categorical value (empty cell)");
                auto [it, inserted] =
                    category_index_[c].emplace(label, categories_[c].size());
                if (inserted) categories_[c].push_back(label);
            }
        }
    }

    FeatureSchema schema_;
    std::vector<DataPoint> rows_;
    std::vector<double> targets_;
    std::vector<Standardization> standardization_;
    std::vector<std::vector<std::string>> categories_;
    std::vector<std::unordered_map<std::string, std::size_t>> category_index_;
};

/// Schema file: a JSON document with `target` and `features: [{name, kind}]`.
inline FeatureSchema load_schema(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open schema file '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("schema file '" + path + "': " + e.what());
    }
    if (!j.contains("target") || !j["target"].is_string())
        throw std::runtime_error("schema file '" + path + "' lacks a string 'target' field");
    if (!j.contains("features") || !j["features"].is_array())
        throw std::runtime_error("schema file '" + path + "' lacks a 'features' array");
    std::vector<FeatureSpec> specs;
    for (const auto& f : j["features"]) {
        if (!f.contains("name") || !f.contains("kind"))
            throw std::runtime_error("schema feature entries need 'name' and 'kind'");
        specs.push_back({f["name"].get<std::string>(),
                         feature_kind_from_string(f["kind"].get<std::string>())});
    }
    return FeatureSchema(std::move(specs), j["target"].get<std::string>());
}

namespace detail {

inline FeatureKind infer_kind(const std::vector<std::string>& cells) {
    // binary beats numeric: a {0,1} column always parses as numbers too
    std::unordered_set<std::string> distinct;
    bool all_numeric = true;
    for (const auto& c : cells) {
        std::string t = trimmed(c);
        distinct.insert(t);
        double v;
        if (!parse_double(t, v)) all_numeric = false;
    }
    if (distinct.size() == 2 && distinct.count("0") && distinct.count("1"))
        return FeatureKind::Binary;
    if (all_numeric) return FeatureKind::Numeric;
    return FeatureKind::Categorical;
}

inline Dataset build_dataset(const std::string& path, const FeatureSchema& schema,
                             const std::vector<std::vector<std::string>>& records) {
    const auto& header = records.front();
    std::unordered_map<std::string, std::size_t> col_of;
    for (std::size_t i = 0; i < header.size(); ++i) col_of[trimmed(header[i])] = i;

    auto lookup = [&](const std::string& name) {
        auto it = col_of.find(name);
        if (it == col_of.end())
            throw std::runtime_error("column '" + name + "' not found in '" + path + "'");
        return it->second;
    };

    auto target_it = col_of.find(schema.target());
    if (target_it == col_of.end())
        throw std::runtime_error("unknown target column '" + schema.target() + "' in '" + path +
                                 "'");
    const std::size_t target_col = target_it->second;
    std::vector<std::size_t> feature_cols;
    for (const auto& f : schema.features()) feature_cols.push_back(lookup(f.name));

    std::vector<DataPoint> rows;
    std::vector<double> targets;
    for (std::size_t r = 1; r < records.size(); ++r) {
        const auto& rec = records[r];
        if (rec.size() == 1 && rec[0].empty()) continue;  // trailing blank line
        if (rec.size() != header.size())
            throw std::runtime_error("malformed CSV row " + std::to_string(r + 1) + " in '" +
                                     path + "': expected " + std::to_string(header.size()) +
                                     " fields, got " + std::to_string(rec.size()));
        DataPoint p;
        for (std::size_t i = 0; i < schema.size(); ++i) {
            const auto& spec = schema.features()[i];
            const std::string& cell = rec[feature_cols[i]];
            if (trimmed(cell).empty())
                throw std::runtime_error("missing value at row " + std::to_string(r + 1) +
                                         ", column '" + spec.name + "' in '" + path + "'");
            switch (spec.kind) {
                case FeatureKind::Numeric: {
                    double v;
                    if (!parse_double(cell, v))
                        throw std::runtime_error("unparsable numeric cell '" + cell +
                                                 "' at row " + std::to_string(r + 1) +
                                                 ", column '" + spec.name + "'");
                    p.numeric.push_back(v);
                    break;
                }
                case FeatureKind::Categorical:
                    p.categorical.push_back(trimmed(cell));
                    break;
                case FeatureKind::Binary: {
                    std::string t = trimmed(cell);
                    if (t != "0" && t != "1")
                        throw std::runtime_error("binary cell '" + cell + "' at row " +
                                                 std::to_string(r + 1) + ", column '" +
                                                 spec.name + "' is not 0 or 1");
                    p.binary.push_back(t == "1" ? 1 : 0);
                    break;
                }
            }
        }
        double y;
        if (!parse_double(rec[target_col], y))
            throw std::runtime_error("unparsable target cell '" + rec[target_col] +
                                     "' at row " + std::to_string(r + 1));
        rows.push_back(std::move(p));
        targets.push_back(y);
    }
    if (rows.empty()) throw std::runtime_error("empty dataset: '" + path + "' has no data rows");
    return Dataset(schema, std::move(rows), std::move(targets));
}

}  // namespace detail

/// Loads an RFC-4180 CSV with header row against an explicit schema.
inline Dataset load_csv(const std::string& path, const FeatureSchema& schema) {
    auto records = detail::read_csv(path);
    if (records.empty()) throw std::runtime_error("empty dataset: '" + path + "' has no rows");
    return detail::build_dataset(path, schema, records);
}

/// Loads a CSV without a schema: kinds are inferred per column (two
/// distinct values 0/1 -> binary; all cells parse as numbers -> numeric;
/// anything else -> categorical). Every non-target column becomes a feature.
inline Dataset load_csv(const std::string& path, const std::string& target_column) {
    auto records = detail::read_csv(path);
    if (records.empty()) throw std::runtime_error("empty dataset: '" + path + "' has no rows");
    const auto& header = records.front();
    if (records.size() < 2) throw std::runtime_error("empty dataset: '" + path + "' has no data rows");

    std::vector<FeatureSpec> specs;
    bool saw_target = false;
    for (std::size_t col = 0; col < header.size(); ++col) {
        std::string name = detail::trimmed(header[col]);
        if (name == target_column) {
            saw_target = true;
            continue;
        }
        std::vector<std::string> cells;
        cells.reserve(records.size() - 1);
        for (std::size_t r = 1; r < records.size(); ++r) {
            const auto& rec = records[r];
            if (rec.size() == 1 && rec[0].empty()) continue;
            if (col < rec.size()) cells.push_back(rec[col]);
        }
        specs.push_back({name, detail::infer_kind(cells)});
    }
    if (!saw_target)
        throw std::runtime_error("unknown target column '" + target_column + "' in '" + path + "'");
    return detail::build_dataset(path, FeatureSchema(std::move(specs), target_column), records);
}

/// Dense design matrix over one column per numeric feature, per
/// (categorical feature, category) pair and per binary feature, in schema
/// order with categories in first-appearance order.
struct EncodedMatrix {
    std::vector<std::string> column_names;
    Eigen::MatrixXd values;            // rows x columns
    std::vector<std::size_t> origin;   // encoded column -> schema feature index
};

/// One-hot encodes the dataset into a matrix suitable for linear fitting.
/// Pure function of the dataset; column order is deterministic.
inline EncodedMatrix encode(const Dataset& ds) {
    const auto& schema = ds.schema();
    EncodedMatrix m;
    for (std::size_t i = 0; i < schema.size(); ++i) {
        const auto& spec = schema.features()[i];
        switch (spec.kind) {
            case FeatureKind::Numeric:
            case FeatureKind::Binary:
                m.column_names.push_back(spec.name);
                m.origin.push_back(i);
                break;
            case FeatureKind::Categorical:
                for (const auto& label : ds.categories(schema.kind_offset(i))) {
                    m.column_names.push_back(spec.name + "=" + label);
                    m.origin.push_back(i);
                }
                break;
        }
    }
    m.values.setZero(static_cast<Eigen::Index>(ds.size()),
                     static_cast<Eigen::Index>(m.column_names.size()));
    for (std::size_t r = 0; r < ds.size(); ++r) {
        const DataPoint& p = ds.row(r);
        Eigen::Index col = 0;
        for (std::size_t i = 0; i < schema.size(); ++i) {
            const auto& spec = schema.features()[i];
            const std::size_t k = schema.kind_offset(i);
            switch (spec.kind) {
                case FeatureKind::Numeric:
                    m.values(static_cast<Eigen::Index>(r), col++) = p.numeric[k];
                    break;
                case FeatureKind::Binary:
                    m.values(static_cast<Eigen::Index>(r), col++) = p.binary[k];
                    break;
                case FeatureKind::Categorical: {
                    const auto idx = ds.category_index(k, p.categorical[k]);
                    m.values(static_cast<Eigen::Index>(r), col + static_cast<Eigen::Index>(*idx)) = 1.0;
                    col += static_cast<Eigen::Index>(ds.categories(k).size());
                    break;
                }
            }
        }
    }
    return m;
}

/// Encodes a single point into the same column layout as encode(ds).
inline Eigen::RowVectorXd encode_point(const Dataset& ds, const DataPoint& p) {
    ds.validate_point(p);
    const auto& schema = ds.schema();
    std::size_t cols = 0;
    for (std::size_t i = 0; i < schema.size(); ++i)
        cols += schema.features()[i].kind == FeatureKind::Categorical
                    ? ds.categories(schema.kind_offset(i)).size()
                    : 1;
    Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(cols));
    Eigen::Index col = 0;
    for (std::size_t i = 0; i < schema.size(); ++i) {
        const auto& spec = schema.features()[i];
        const std::size_t k = schema.kind_offset(i);
        switch (spec.kind) {
            case FeatureKind::Numeric:
                row(col++) = p.numeric[k];
                break;
            case FeatureKind::Binary:
                row(col++) = p.binary[k];
                break;
            case FeatureKind::Categorical: {
                const auto idx = ds.category_index(k, p.categorical[k]);
                row(col + static_cast<Eigen::Index>(*idx)) = 1.0;
                col += static_cast<Eigen::Index>(ds.categories(k).size());
                break;
            }
        }
    }
    return row;
}

}  // namespace loclin
