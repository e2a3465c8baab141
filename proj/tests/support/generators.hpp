#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "loclin/dataset.hpp"

namespace testsupport {

/// Deterministic mixed-type table: `mn` numeric columns, one categorical
/// column per entry of `cat_sizes` (entry = alphabet size), `mb` binary
/// columns. Targets are a noisy linear function of the first numeric
/// column (or pure noise when mn == 0).
inline loclin::Dataset random_mixed_dataset(unsigned seed, std::size_t n, std::size_t mn,
                                            const std::vector<std::size_t>& cat_sizes,
                                            std::size_t mb) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> unif(-5.0, 5.0);
    std::normal_distribution<double> noise(0.0, 1.0);

    std::vector<loclin::FeatureSpec> specs;
    for (std::size_t j = 0; j < mn; ++j)
        specs.push_back({"num" + std::to_string(j), loclin::FeatureKind::Numeric});
    for (std::size_t c = 0; c < cat_sizes.size(); ++c)
        specs.push_back({"cat" + std::to_string(c), loclin::FeatureKind::Categorical});
    for (std::size_t b = 0; b < mb; ++b)
        specs.push_back({"bin" + std::to_string(b), loclin::FeatureKind::Binary});

    std::vector<loclin::DataPoint> rows;
    std::vector<double> targets;
    for (std::size_t r = 0; r < n; ++r) {
        loclin::DataPoint p;
        for (std::size_t j = 0; j < mn; ++j) p.numeric.push_back(unif(rng));
        for (std::size_t c = 0; c < cat_sizes.size(); ++c) {
            std::uniform_int_distribution<std::size_t> pick(0, cat_sizes[c] - 1);
            p.categorical.push_back("v" + std::to_string(pick(rng)));
        }
        for (std::size_t b = 0; b < mb; ++b) {
            std::uniform_int_distribution<int> coin(0, 1);
            p.binary.push_back(coin(rng));
        }
        double y = noise(rng);
        if (mn > 0) y += 3.0 * p.numeric[0];
        rows.push_back(std::move(p));
        targets.push_back(y);
    }
    return loclin::Dataset(loclin::FeatureSchema(std::move(specs), "y"), std::move(rows),
                           std::move(targets));
}

/// Two linear regimes on opposite quadrants: x in ±[1.5, 4], z signed like
/// x in [0, 3], y = 4|x| - 2|z| + noise. The target is continuous across
/// the gap between regimes, and the trailing 24 rows (the default test
/// split of the 120) sit in regime interiors. Within one regime the target
/// is exactly linear, so each regime supports a single explanation.
inline loclin::Dataset two_regime_dataset(unsigned seed, double noise_sd) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> body_x(1.5, 4.0);
    std::uniform_real_distribution<double> query_x(2.0, 3.6);
    std::uniform_real_distribution<double> body_z(0.0, 3.0);
    std::uniform_real_distribution<double> query_z(0.4, 2.6);
    std::normal_distribution<double> g(0.0, 1.0);

    std::vector<loclin::FeatureSpec> specs = {{"x", loclin::FeatureKind::Numeric},
                                              {"z", loclin::FeatureKind::Numeric}};
    std::vector<loclin::DataPoint> rows;
    std::vector<double> targets;
    auto push = [&](bool left, double ax, double az) {
        double x = left ? -ax : ax;
        double z = left ? -az : az;
        rows.push_back({{x, z}, {}, {}});
        targets.push_back(4.0 * ax - 2.0 * az + noise_sd * g(rng));
    };
    for (int i = 0; i < 96; ++i) push(i % 2 == 0, body_x(rng), body_z(rng));
    for (int i = 0; i < 24; ++i) push(i % 2 == 0, query_x(rng), query_z(rng));
    return loclin::Dataset(loclin::FeatureSchema(std::move(specs), "y"), std::move(rows),
                           std::move(targets));
}

}  // namespace testsupport
