#include "fallacy/svg.hpp"

#include <cstdio>
#include <sstream>

namespace fallacy::svg {

namespace {

constexpr double kWidth = 480, kHeight = 400, kLeft = 60, kRight = 20, kTop = 40, kBottom = 50;
constexpr double kPlotW = kWidth - kLeft - kRight, kPlotH = kHeight - kTop - kBottom;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

std::string fmt(double v) {
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

void open(std::ostringstream& o, const std::string& title) {
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">" << escape(title)
      << "</text>\n";
    o << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << kPlotW << "\" height=\"" << kPlotH
      << "\" fill=\"none\" stroke=\"black\"/>\n";
}

double px(double fraction) { return kLeft + fraction * kPlotW; }
double py(double fraction) { return kTop + (1.0 - fraction) * kPlotH; }

void y_axis(std::ostringstream& o, double y_min, double y_max) {
    for (int i = 0; i <= 5; ++i) {
        const double f = i / 5.0;
        o << "<text x=\"" << kLeft - 6 << "\" y=\"" << fmt(py(f) + 4) << "\" text-anchor=\"end\">"
          << fmt(y_min + f * (y_max - y_min)) << "</text>\n";
        o << "<line x1=\"" << kLeft << "\" x2=\"" << kLeft + kPlotW << "\" y1=\"" << fmt(py(f)) << "\" y2=\""
          << fmt(py(f)) << "\" stroke=\"#ddd\"/>\n";
    }
}

}  // namespace

std::string reliability_diagram(const eval::Reliability& r, const std::string& title) {
    std::ostringstream o;
    open(o, title);
    y_axis(o, 0.0, 1.0);
    for (const auto& b : r.bins) {
        if (!b.count) continue;
        o << "<rect x=\"" << fmt(px(b.lower) + 1) << "\" y=\"" << fmt(py(b.empirical_accuracy)) << "\" width=\""
          << fmt((b.upper - b.lower) * kPlotW - 2) << "\" height=\"" << fmt(b.empirical_accuracy * kPlotH)
          << "\" fill=\"#1f77b4\" fill-opacity=\"0.8\"><title>" << b.count << " samples, accuracy "
          << fmt(b.empirical_accuracy) << ", confidence " << fmt(b.mean_confidence) << "</title></rect>\n";
    }
    o << "<line x1=\"" << px(0) << "\" y1=\"" << py(0) << "\" x2=\"" << px(1) << "\" y2=\"" << py(1)
      << "\" stroke=\"#d62728\" stroke-dasharray=\"4 3\"/>\n";
    for (int i = 0; i <= 5; ++i) {
        o << "<text x=\"" << fmt(px(i / 5.0)) << "\" y=\"" << kTop + kPlotH + 16 << "\" text-anchor=\"middle\">"
          << fmt(i / 5.0) << "</text>\n";
    }
    o << "<text x=\"" << px(0.5) << "\" y=\"" << kHeight - 12 << "\" text-anchor=\"middle\">confidence</text>\n";
    o << "<text x=\"16\" y=\"" << py(0.5) << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " << py(0.5)
      << ")\">accuracy</text>\n";
    o << "<text x=\"" << kLeft + 8 << "\" y=\"" << kTop + 16 << "\">ECE " << fmt(r.ece) << "</text>\n";
    o << "</svg>\n";
    return o.str();
}

std::string line_chart(const std::string& title, const std::vector<std::string>& x_labels,
                       const std::vector<Series>& series, double y_min, double y_max) {
    std::ostringstream o;
    open(o, title);
    y_axis(o, y_min, y_max);
    const std::size_t n = x_labels.size();
    auto x_of = [&](std::size_t i) { return px(n <= 1 ? 0.5 : static_cast<double>(i) / static_cast<double>(n - 1)); };
    auto y_of = [&](double y) { return py(y_max == y_min ? 0.0 : (y - y_min) / (y_max - y_min)); };
    for (std::size_t i = 0; i < n; ++i) {
        o << "<text x=\"" << fmt(x_of(i)) << "\" y=\"" << kTop + kPlotH + 16 << "\" text-anchor=\"middle\">"
          << escape(x_labels[i]) << "</text>\n";
    }
    for (std::size_t s = 0; s < series.size(); ++s) {
        const char* color = kPalette[s % (sizeof kPalette / sizeof *kPalette)];
        std::string path;
        bool pen_down = false;
        for (std::size_t i = 0; i < n && i < series[s].ys.size(); ++i) {
            if (!series[s].ys[i]) {
                pen_down = false;
                continue;
            }
            path += (pen_down ? "L" : "M") + fmt(x_of(i)) + " " + fmt(y_of(*series[s].ys[i])) + " ";
            pen_down = true;
            o << "<circle cx=\"" << fmt(x_of(i)) << "\" cy=\"" << fmt(y_of(*series[s].ys[i])) << "\" r=\"3\" fill=\""
              << color << "\"/>\n";
        }
        if (!path.empty()) o << "<path d=\"" << path << "\" fill=\"none\" stroke=\"" << color << "\"/>\n";
        o << "<text x=\"" << kLeft + kPlotW - 4 << "\" y=\"" << kTop + 16 + 14 * s << "\" text-anchor=\"end\" fill=\""
          << color << "\">" << escape(series[s].name) << "</text>\n";
    }
    o << "</svg>\n";
    return o.str();
}

}  // namespace fallacy::svg
