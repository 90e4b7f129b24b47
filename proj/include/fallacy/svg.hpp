#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fallacy/eval.hpp"

namespace fallacy::svg {

/// Bars of empirical accuracy per bin against the diagonal of perfect
/// calibration. Self-contained, no external styles.
std::string reliability_diagram(const eval::Reliability& r, const std::string& title);

struct Series {
    std::string name;
    /// One y per x; nullopt leaves a gap.
    std::vector<std::optional<double>> ys;
};

/// Simple multi-series line chart with y in [y_min, y_max].
std::string line_chart(const std::string& title, const std::vector<std::string>& x_labels,
                       const std::vector<Series>& series, double y_min = 0.0, double y_max = 1.0);

}  // namespace fallacy::svg
