#include "tcftl/plot.hpp"

#include <cstdio>
#include <sstream>

namespace tcftl {

namespace {

constexpr double kWidth = 560;
constexpr double kHeight = 480;
constexpr double kLeft = 70;
constexpr double kRight = 170;
constexpr double kTop = 40;
constexpr double kBottom = 60;

const char* const kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2"};

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

}  // namespace

std::string render_svg(const Chart& chart) {
    const double pw = kWidth - kLeft - kRight;
    const double ph = kHeight - kTop - kBottom;
    auto px = [&](double x) { return kLeft + x * pw; };
    auto py = [&](double y) { return kTop + (1.0 - y) * ph; };

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
       << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << num(kLeft + pw / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
       << escape(chart.title) << "</text>\n";

    for (int i = 0; i <= 10; ++i) {
        const double t = i / 10.0;
        os << "<line x1=\"" << num(px(t)) << "\" y1=\"" << num(py(0)) << "\" x2=\"" << num(px(t)) << "\" y2=\""
           << num(py(1)) << "\" stroke=\"#eee\"/>\n";
        os << "<line x1=\"" << num(px(0)) << "\" y1=\"" << num(py(t)) << "\" x2=\"" << num(px(1)) << "\" y2=\""
           << num(py(t)) << "\" stroke=\"#eee\"/>\n";
        if (i % 2 == 0) {
            os << "<text x=\"" << num(px(t)) << "\" y=\"" << num(py(0) + 16) << "\" text-anchor=\"middle\">"
               << num(t).substr(0, 3) << "</text>\n";
            os << "<text x=\"" << num(px(0) - 6) << "\" y=\"" << num(py(t) + 4) << "\" text-anchor=\"end\">"
               << num(t).substr(0, 3) << "</text>\n";
        }
    }
    os << "<rect x=\"" << num(kLeft) << "\" y=\"" << num(kTop) << "\" width=\"" << num(pw) << "\" height=\""
       << num(ph) << "\" fill=\"none\" stroke=\"black\"/>\n";
    os << "<text x=\"" << num(kLeft + pw / 2) << "\" y=\"" << num(kHeight - 18)
       << "\" text-anchor=\"middle\">" << escape(chart.x_label) << "</text>\n";
    os << "<text transform=\"translate(20," << num(kTop + ph / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
       << escape(chart.y_label) << "</text>\n";

    std::size_t color = 0;
    for (std::size_t k = 0; k < chart.series.size(); ++k) {
        const auto& s = chart.series[k];
        const std::string stroke = s.dashed ? "#888" : kColors[color++ % std::size(kColors)];
        os << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"1.5\"";
        if (s.dashed) os << " stroke-dasharray=\"5,4\"";
        os << " points=\"";
        for (std::size_t i = 0; i < s.points.size(); ++i) {
            if (i) os << ' ';
            os << num(px(s.points[i].first)) << ',' << num(py(s.points[i].second));
        }
        os << "\"/>\n";
        const double ly = kTop + 12 + 18 * static_cast<double>(k);
        os << "<line x1=\"" << num(kWidth - kRight + 12) << "\" y1=\"" << num(ly) << "\" x2=\""
           << num(kWidth - kRight + 32) << "\" y2=\"" << num(ly) << "\" stroke=\"" << stroke << "\"";
        if (s.dashed) os << " stroke-dasharray=\"5,4\"";
        os << "/>\n<text x=\"" << num(kWidth - kRight + 36) << "\" y=\"" << num(ly + 4) << "\">" << escape(s.name)
           << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

std::string det_svg(const std::vector<std::pair<std::string, DetCurve>>& curves, const std::string& title) {
    Chart chart{title, "P_FA", "P_D", {}};
    for (const auto& [name, curve] : curves) {
        Series s{name, {}, false};
        for (const auto& p : curve.points) s.points.emplace_back(p.p_fa, p.p_d);
        chart.series.push_back(std::move(s));
    }
    chart.series.push_back({"coin flip", {{0.0, 0.0}, {1.0, 1.0}}, true});
    return render_svg(chart);
}

std::string fdr_svg(const std::vector<std::pair<std::string, FdrCurve>>& curves, const std::string& title) {
    Chart chart{title, "FDR", "P_D", {}};
    for (const auto& [name, curve] : curves) {
        Series s{name, {}, false};
        for (const auto& p : curve.points) s.points.emplace_back(p.fdr, p.p_d);
        chart.series.push_back(std::move(s));
    }
    return render_svg(chart);
}

}  // namespace tcftl
