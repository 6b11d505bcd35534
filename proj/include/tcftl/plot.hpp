// Minimal SVG line charts for DET and FDR curves.
#pragma once

#include <string>
#include <utility>
#include <vector>

#include "tcftl/evaluation.hpp"

namespace tcftl {

struct Series {
    std::string name;
    std::vector<std::pair<double, double>> points;
    bool dashed = false;
};

struct Chart {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<Series> series;
};

/// Axes span [0, 1] on both sides.
std::string render_svg(const Chart& chart);

/// DET chart with the coin-flip diagonal drawn dashed.
std::string det_svg(const std::vector<std::pair<std::string, DetCurve>>& curves, const std::string& title);
/// P_D against FDR.
std::string fdr_svg(const std::vector<std::pair<std::string, FdrCurve>>& curves, const std::string& title);

}  // namespace tcftl
