#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>

#include "loclin/loclin.hpp"

namespace {

/// Post-parse validation failure: reported like a flag error (exit 2).
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Config {
    std::string data_path;
    std::string schema_path;
    std::string target_column;
    double confidence = 0.95;
    double step_percent = 1.0;
    std::string output_format = "structured";
    unsigned threads = 0;  // 0 = all cores

    std::optional<std::size_t> row_index;
    std::string point_text;
    double ref_value = 0.0;
    std::optional<double> epsilon_percent;
    std::optional<std::size_t> max_candidates;
    std::size_t knn = 10;
};

loclin::Dataset load_dataset(const Config& cfg) {
    if (!cfg.schema_path.empty()) {
        loclin::FeatureSchema schema = loclin::load_schema(cfg.schema_path);
        if (!cfg.target_column.empty() && cfg.target_column != schema.target()) {
            // the overriding target may itself be listed as a feature
            std::vector<loclin::FeatureSpec> specs;
            for (const auto& f : schema.features())
                if (f.name != cfg.target_column) specs.push_back(f);
            schema = loclin::FeatureSchema(std::move(specs), cfg.target_column);
        }
        return loclin::load_csv(cfg.data_path, schema);
    }
    if (cfg.target_column.empty())
        throw UsageError("--target is required when no schema file is given");
    return loclin::load_csv(cfg.data_path, cfg.target_column);
}

/// Parses `key=value,...` against the schema and standardizes numerics to
/// match the table's units. Every feature must appear exactly once.
loclin::DataPoint parse_point(const loclin::Dataset& ds, const std::string& text) {
    std::unordered_map<std::string, std::string> kv;
    std::size_t start = 0;
    while (start < text.size()) {
        std::size_t end = text.find(',', start);
        if (end == std::string::npos) end = text.size();
        const std::string item = text.substr(start, end - start);
        const std::size_t eq = item.find('=');
        if (eq == std::string::npos || eq == 0)
            throw UsageError("--point entry '" + item + "' is not key=value");
        const std::string key = item.substr(0, eq);
        if (!kv.emplace(key, item.substr(eq + 1)).second)
            throw UsageError("--point names feature '" + key + "' twice");
        start = end + 1;
    }

    const auto& schema = ds.schema();
    loclin::DataPoint p;
    for (const auto& spec : schema.features()) {
        auto it = kv.find(spec.name);
        if (it == kv.end()) throw UsageError("--point misses feature '" + spec.name + "'");
        const std::string& value = it->second;
        switch (spec.kind) {
            case loclin::FeatureKind::Numeric: {
                double v;
                if (!loclin::detail::parse_double(value, v))
                    throw UsageError("--point value '" + value + "' for numeric feature '" +
                                     spec.name + "' is not a number");
                p.numeric.push_back(ds.standardize_value(p.numeric.size(), v));
                break;
            }
            case loclin::FeatureKind::Categorical:
                p.categorical.push_back(value);
                break;
            case loclin::FeatureKind::Binary:
                if (value != "0" && value != "1")
                    throw UsageError("--point value '" + value + "' for binary feature '" +
                                     spec.name + "' is not 0 or 1");
                p.binary.push_back(value == "1" ? 1 : 0);
                break;
        }
        kv.erase(it);
    }
    if (!kv.empty())
        throw UsageError("--point names unknown feature '" + kv.begin()->first + "'");
    return p;
}

void check_one_of(const Config& cfg) {
    const bool has_index = cfg.row_index.has_value();
    const bool has_point = !cfg.point_text.empty();
    if (has_index == has_point) throw UsageError("give exactly one of --index or --point");
}

std::size_t checked_row(const loclin::Dataset& ds, const Config& cfg) {
    if (*cfg.row_index >= ds.size())
        throw std::runtime_error("row index " + std::to_string(*cfg.row_index) +
                                 " is out of range: the table has " + std::to_string(ds.size()) +
                                 " rows");
    return *cfg.row_index;
}

int cmd_explain(const Config& cfg) {
    loclin::Dataset ds = load_dataset(cfg);
    check_one_of(cfg);
    loclin::ExplainOptions opts{cfg.confidence, cfg.step_percent};
    loclin::Explainer ex(ds, opts);
    loclin::Explanation e = cfg.row_index ? ex.explain_row(checked_row(ds, cfg))
                                          : ex.explain_point(parse_point(ds, cfg.point_text));
    std::fputs(loclin::render_explanation(e, cfg.output_format).c_str(), stdout);
    return 0;
}

int cmd_counterfactual(const Config& cfg) {
    loclin::Dataset ds = load_dataset(cfg);
    check_one_of(cfg);
    loclin::CounterfactualQuery q;
    q.point = cfg.row_index ? ds.row(checked_row(ds, cfg)) : parse_point(ds, cfg.point_text);
    q.reference_value = cfg.ref_value;
    q.max_candidates = cfg.max_candidates;
    if (cfg.epsilon_percent) {
        const auto [lo, hi] = std::minmax_element(ds.targets().begin(), ds.targets().end());
        const double scale = cfg.ref_value != 0.0 ? std::abs(cfg.ref_value) : *hi - *lo;
        q.epsilon = *cfg.epsilon_percent / 100.0 * scale;
    }
    loclin::ExplainOptions opts{cfg.confidence, cfg.step_percent};
    loclin::CounterfactualExplanation ce = loclin::counterfactual(ds, q, opts);
    std::fputs(loclin::render_counterfactual(ce, cfg.output_format).c_str(), stdout);
    return 0;
}

int cmd_evaluate(const Config& cfg) {
    loclin::Dataset ds = load_dataset(cfg);
    loclin::EvaluationOptions opts;
    opts.explain = {cfg.confidence, cfg.step_percent};
    opts.knn = cfg.knn;
    loclin::EvaluationReport rep = loclin::evaluate(ds, opts);
    std::fputs(loclin::render_evaluation(rep, cfg.output_format).c_str(), stdout);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    Config cfg;
    CLI::App app{"local linear surrogate explanations for tabular regression"};
    app.require_subcommand(1);

    auto open_unit = CLI::Validator(
        [](std::string& s) {
            double v = std::stod(s);
            return v > 0.0 && v < 1.0 ? "" : "must lie in (0,1)";
        },
        "(0,1)");
    auto percent_step = CLI::Validator(
        [](std::string& s) {
            double v = std::stod(s);
            return v > 0.0 && v <= 100.0 ? "" : "must lie in (0,100]";
        },
        "(0,100]");
    auto positive = CLI::Validator(
        [](std::string& s) { return std::stod(s) > 0.0 ? "" : "must be positive"; },
        "POSITIVE");

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--data,--data-path", cfg.data_path, "CSV file with a header row")
            ->required();
        sub->add_option("--schema,--schema-path", cfg.schema_path,
                        "JSON schema file; omit to infer feature kinds");
        sub->add_option("--target,--target-column", cfg.target_column,
                        "target column (required without --schema, overrides it otherwise)");
        sub->add_option("--confidence", cfg.confidence, "confidence level for the score bound")
            ->check(open_unit)
            ->capture_default_str();
        sub->add_option("--step-percent", cfg.step_percent,
                        "neighborhood scan step as a percentage of the table")
            ->check(percent_step)
            ->capture_default_str();
        sub->add_option("--output-format", cfg.output_format, "output format")
            ->check(CLI::IsMember({"text", "structured"}))
            ->capture_default_str();
        sub->add_option("--threads", cfg.threads, "worker threads (0 = all cores)")
            ->capture_default_str();
    };
    auto add_point = [&](CLI::App* sub) {
        sub->add_option("--index,--row-index", cfg.row_index, "explain this table row");
        sub->add_option("--point", cfg.point_text,
                        "explain an inline point given as key=value,...");
    };

    CLI::App* explain = app.add_subcommand("explain", "explain one prediction");
    add_common(explain);
    add_point(explain);

    CLI::App* counterfactual =
        app.add_subcommand("counterfactual", "smallest change reaching a reference value");
    add_common(counterfactual);
    add_point(counterfactual);
    counterfactual->add_option("--ref-value", cfg.ref_value, "reference target value")
        ->required();
    counterfactual
        ->add_option("--epsilon-percent", cfg.epsilon_percent,
                     "tolerance band around the reference, % of |ref| (default 5)")
        ->check(positive);
    counterfactual->add_option("--max-candidates", cfg.max_candidates,
                               "cap on candidate rows inside the band")
        ->check(positive);

    CLI::App* evaluate = app.add_subcommand("evaluate", "run the evaluation harness");
    add_common(evaluate);
    evaluate->add_option("--knn", cfg.knn, "neighbors per point in the robustness metric")
        ->check(positive)
        ->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }

    try {
        loclin::set_thread_count(cfg.threads);
        if (explain->parsed()) return cmd_explain(cfg);
        if (counterfactual->parsed()) return cmd_counterfactual(cfg);
        return cmd_evaluate(cfg);
    } catch (const UsageError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
