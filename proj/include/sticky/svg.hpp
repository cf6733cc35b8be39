#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "sticky/error.hpp"

namespace sticky::svg {

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
    std::string color = "#1f77b4";
};

struct PlotOptions {
    std::string title;
    std::string x_label;
    std::string y_label;
    int width = 640;
    int height = 400;
    std::string comment;  // embedded verbatim as an XML comment (config, version, timestamp)
};

namespace detail {

inline std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

inline std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '&': out += "&amp;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

inline std::string comment_safe(std::string s) {
    for (std::size_t p; (p = s.find("--")) != std::string::npos;) s.replace(p, 2, "- -");
    return s;
}

inline void header(std::ostream& os, const PlotOptions& opt) {
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << opt.width << "\" height=\"" << opt.height
       << "\" viewBox=\"0 0 " << opt.width << ' ' << opt.height << "\">\n";
    if (!opt.comment.empty()) os << "<!-- " << comment_safe(opt.comment) << " -->\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    if (!opt.title.empty())
        os << "<text x=\"" << opt.width / 2 << "\" y=\"20\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">"
           << escape(opt.title) << "</text>\n";
}

struct Frame {
    double left = 60, right = 20, top = 32, bottom = 44;
    double x0, x1, y0, y1;
    int width, height;

    double px(double x) const { return left + (x - x0) / (x1 - x0) * (width - left - right); }
    double py(double y) const { return height - bottom - (y - y0) / (y1 - y0) * (height - top - bottom); }
};

inline void axes(std::ostream& os, const Frame& f, const PlotOptions& opt) {
    os << "<g stroke=\"black\" stroke-width=\"1\" fill=\"none\">\n";
    os << "<rect x=\"" << f.left << "\" y=\"" << f.top << "\" width=\"" << f.width - f.left - f.right << "\" height=\""
       << f.height - f.top - f.bottom << "\"/>\n</g>\n";
    os << "<g font-family=\"sans-serif\" font-size=\"11\">\n";
    for (int i = 0; i <= 4; ++i) {
        double xv = f.x0 + (f.x1 - f.x0) * i / 4.0, yv = f.y0 + (f.y1 - f.y0) * i / 4.0;
        os << "<text x=\"" << num(f.px(xv)) << "\" y=\"" << f.height - f.bottom + 14 << "\" text-anchor=\"middle\">" << num(xv)
           << "</text>\n";
        os << "<text x=\"" << f.left - 4 << "\" y=\"" << num(f.py(yv) + 4) << "\" text-anchor=\"end\">" << num(yv) << "</text>\n";
    }
    if (!opt.x_label.empty())
        os << "<text x=\"" << num((f.left + f.width - f.right) / 2) << "\" y=\"" << f.height - 8 << "\" text-anchor=\"middle\">"
           << escape(opt.x_label) << "</text>\n";
    if (!opt.y_label.empty())
        os << "<text x=\"14\" y=\"" << num((f.top + f.height - f.bottom) / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 14 "
           << num((f.top + f.height - f.bottom) / 2) << ")\">" << escape(opt.y_label) << "</text>\n";
    os << "</g>\n";
}

} // namespace detail

/// Line plot of one or more series on shared axes.
inline void line_plot(std::ostream& os, const std::vector<Series>& series, const PlotOptions& opt = {}) {
    if (series.empty()) throw Error("svg: no series to plot");
    double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
    for (const auto& s : series) {
        if (s.x.size() != s.y.size()) throw Error("svg: series '" + s.label + "' has mismatched lengths");
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            x0 = std::min(x0, s.x[i]);
            x1 = std::max(x1, s.x[i]);
            y0 = std::min(y0, s.y[i]);
            y1 = std::max(y1, s.y[i]);
        }
    }
    if (!(x1 > x0)) x1 = x0 + 1.0;
    if (!(y1 > y0)) y1 = y0 + 1.0;
    detail::Frame f{60, 20, 32, 44, x0, x1, y0, y1, opt.width, opt.height};
    detail::header(os, opt);
    detail::axes(os, f, opt);
    int row = 0;
    for (const auto& s : series) {
        os << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.2\" points=\"";
        for (std::size_t i = 0; i < s.x.size(); ++i)
            if (std::isfinite(s.x[i]) && std::isfinite(s.y[i])) os << detail::num(f.px(s.x[i])) << ',' << detail::num(f.py(s.y[i])) << ' ';
        os << "\"/>\n";
        if (!s.label.empty())
            os << "<text x=\"" << opt.width - f.right - 4 << "\" y=\"" << f.top + 14 + 14 * row++
               << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\" fill=\"" << s.color << "\">"
               << detail::escape(s.label) << "</text>\n";
    }
    os << "</svg>\n";
}

/// Heatmap of rows (e.g. time snapshots) against columns (grid cells), with
/// a white-to-dark-blue scale clipped at the `quantile` of all values.
inline void heatmap(std::ostream& os, const std::vector<std::vector<double>>& rows, double x0, double x1, double y0,
                    double y1, const PlotOptions& opt = {}, double quantile = 0.99) {
    if (rows.empty() || rows.front().empty()) throw Error("svg: empty heatmap");
    std::size_t cols = rows.front().size();
    std::vector<double> all;
    for (const auto& r : rows) {
        if (r.size() != cols) throw Error("svg: heatmap rows differ in length");
        all.insert(all.end(), r.begin(), r.end());
    }
    std::sort(all.begin(), all.end());
    double top = all[std::min(all.size() - 1, static_cast<std::size_t>(quantile * static_cast<double>(all.size())))];
    if (!(top > 0.0)) top = 1.0;
    detail::Frame f{60, 20, 32, 44, x0, x1, y0, y1, opt.width, opt.height};
    detail::header(os, opt);
    double cw = (f.px(x1) - f.px(x0)) / static_cast<double>(cols);
    double rh = (f.py(y0) - f.py(y1)) / static_cast<double>(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < cols; ++c) {
            double s = std::clamp(rows[r][c] / top, 0.0, 1.0);
            int red = static_cast<int>(255 - 247 * s), green = static_cast<int>(255 - 207 * s), blue = static_cast<int>(255 - 148 * s);
            os << "<rect x=\"" << detail::num(f.px(x0) + cw * static_cast<double>(c)) << "\" y=\""
               << detail::num(f.py(y0) - rh * static_cast<double>(r + 1)) << "\" width=\"" << detail::num(cw + 0.05) << "\" height=\""
               << detail::num(rh + 0.05) << "\" fill=\"rgb(" << red << ',' << green << ',' << blue << ")\"/>\n";
        }
    detail::axes(os, f, opt);
    os << "</svg>\n";
}

} // namespace sticky::svg
