#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "harness.hpp"

namespace dqa {

struct Series {
    std::string label;
    std::vector<std::pair<double, double>> points;
    bool dashed = false;
    std::optional<std::string> color;
};

struct HeatmapSpec {
    std::string x = "M";
    std::string y = "t_F";
    std::string value = "eps_T0";
    bool log_x = true, log_y = true, log_value = true;
    std::string title;
    std::optional<double> vmin, vmax;
    std::vector<Series> overlays;
};

struct CurveSpec {
    std::string x = "t_F";
    std::string y = "eps_A0";
    std::vector<std::string> group{"model"};
    bool log_x = true, log_y = true;
    std::string title;
    std::string x_label, y_label;
};

namespace svg {

inline std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

inline std::string esc(const std::string &s) {
    std::string o;
    for (char c : s) {
        if (c == '<')
            o += "&lt;";
        else if (c == '>')
            o += "&gt;";
        else if (c == '&')
            o += "&amp;";
        else
            o += c;
    }
    return o;
}

inline std::string tick_label(double v) {
    char buf[32];
    if (v != 0.0 && (std::abs(v) < 1e-2 || std::abs(v) >= 1e4))
        std::snprintf(buf, sizeof buf, "%.0e", v);
    else
        std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

/// Viridis sampled at five stops, linearly interpolated.
inline std::string colormap(double f) {
    static const std::array<std::array<double, 3>, 5> stops{
        {{68, 1, 84}, {59, 82, 139}, {33, 145, 140}, {94, 201, 98}, {253, 231, 37}}};
    f = std::clamp(std::isnan(f) ? 0.0 : f, 0.0, 1.0) * 4.0;
    const auto i = std::min<std::size_t>(3, static_cast<std::size_t>(f));
    const double t = f - static_cast<double>(i);
    char buf[8];
    int rgb[3];
    for (int k = 0; k < 3; ++k) rgb[k] = static_cast<int>(std::lround(stops[i][k] + t * (stops[i + 1][k] - stops[i][k])));
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", rgb[0], rgb[1], rgb[2]);
    return buf;
}

inline const std::array<const char *, 8> palette{"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                                  "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};

/// Maps data coordinates to pixels over a plot rectangle.
struct Axis {
    double lo, hi;
    bool log;
    double p0, p1;

    [[nodiscard]] double operator()(double v) const {
        const double a = log ? std::log10(lo) : lo, b = log ? std::log10(hi) : hi;
        const double x = log ? std::log10(v) : v;
        return p0 + (x - a) / (b - a) * (p1 - p0);
    }

    [[nodiscard]] std::vector<double> ticks() const {
        std::vector<double> t;
        if (log) {
            for (int e = static_cast<int>(std::floor(std::log10(lo))); e <= static_cast<int>(std::ceil(std::log10(hi))); ++e) {
                const double v = std::pow(10.0, e);
                if (v >= lo * (1 - 1e-9) && v <= hi * (1 + 1e-9)) t.push_back(v);
            }
            if (t.size() < 2) t = {lo, hi};
            return t;
        }
        const double span = hi - lo;
        const double raw = span / 5.0;
        const double mag = std::pow(10.0, std::floor(std::log10(raw)));
        double step = mag;
        for (double m : {1.0, 2.0, 5.0, 10.0})
            if (raw <= m * mag) {
                step = m * mag;
                break;
            }
        for (double v = std::ceil(lo / step) * step; v <= hi + 1e-9 * span; v += step) t.push_back(v);
        return t;
    }
};

inline void frame(std::ostringstream &o, const Axis &ax, const Axis &ay, const std::string &xl, const std::string &yl,
                  const std::string &title) {
    o << "<rect x=\"" << num(ax.p0) << "\" y=\"" << num(ay.p1) << "\" width=\"" << num(ax.p1 - ax.p0)
      << "\" height=\"" << num(ay.p0 - ay.p1) << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (double t : ax.ticks()) {
        const double x = ax(t);
        o << "<line x1=\"" << num(x) << "\" y1=\"" << num(ay.p0) << "\" x2=\"" << num(x) << "\" y2=\"" << num(ay.p0 + 5)
          << "\" stroke=\"black\"/>\n";
        o << "<text x=\"" << num(x) << "\" y=\"" << num(ay.p0 + 18) << "\" text-anchor=\"middle\" font-size=\"11\">"
          << tick_label(t) << "</text>\n";
    }
    for (double t : ay.ticks()) {
        const double y = ay(t);
        o << "<line x1=\"" << num(ax.p0 - 5) << "\" y1=\"" << num(y) << "\" x2=\"" << num(ax.p0) << "\" y2=\"" << num(y)
          << "\" stroke=\"black\"/>\n";
        o << "<text x=\"" << num(ax.p0 - 8) << "\" y=\"" << num(y + 4) << "\" text-anchor=\"end\" font-size=\"11\">"
          << tick_label(t) << "</text>\n";
    }
    o << "<text x=\"" << num((ax.p0 + ax.p1) / 2) << "\" y=\"" << num(ay.p0 + 38)
      << "\" text-anchor=\"middle\" font-size=\"13\">" << esc(xl) << "</text>\n";
    o << "<text transform=\"translate(" << num(ax.p0 - 52) << "," << num((ay.p0 + ay.p1) / 2)
      << ") rotate(-90)\" text-anchor=\"middle\" font-size=\"13\">" << esc(yl) << "</text>\n";
    o << "<text x=\"" << num((ax.p0 + ax.p1) / 2) << "\" y=\"" << num(ay.p1 - 12)
      << "\" text-anchor=\"middle\" font-size=\"14\">" << esc(title) << "</text>\n";
}

inline void polyline(std::ostringstream &o, const Axis &ax, const Axis &ay, const Series &s, const std::string &color) {
    std::string pts;
    for (const auto &[x, y] : s.points) {
        if (std::isnan(x) || std::isnan(y)) continue;
        if ((ax.log && x <= 0) || (ay.log && y <= 0)) continue;
        const double px = ax(x), py = ay(std::clamp(y, ay.lo, ay.hi));
        if (px < ax.p0 - 1e-6 || px > ax.p1 + 1e-6) continue;
        pts += num(px) + "," + num(py) + " ";
    }
    if (pts.empty()) return;
    o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.8\"" << (s.dashed ? " stroke-dasharray=\"6,4\"" : "")
      << " points=\"" << pts << "\"/>\n";
}

inline std::pair<double, double> extent(const std::vector<double> &v, bool log) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (double x : v) {
        if (std::isnan(x) || std::isinf(x) || (log && x <= 0)) continue;
        lo = std::min(lo, x), hi = std::max(hi, x);
    }
    if (!(lo <= hi)) return {log ? 1.0 : 0.0, log ? 10.0 : 1.0};
    if (lo == hi) {
        if (log) return {lo / 2, hi * 2};
        return {lo - 0.5, hi + 0.5};
    }
    return {lo, hi};
}

} // namespace svg

/// Heatmap of one value column over two grid columns. Cell edges sit halfway
/// (geometrically on log axes) between neighbouring grid values.
[[nodiscard]] inline std::string render_heatmap(const SweepResult &res, const HeatmapSpec &spec) {
    std::set<double> xs_set, ys_set;
    std::map<std::pair<double, double>, double> cells;
    for (const auto &r : res.rows) {
        if (r.status != "ok") continue;
        const double x = column(r, spec.x), y = column(r, spec.y), v = column(r, spec.value);
        if (std::isnan(x) || std::isnan(y)) continue;
        xs_set.insert(x), ys_set.insert(y);
        cells[{x, y}] = v;
    }
    if (xs_set.empty()) throw ConfigError("heatmap has no data");
    const std::vector<double> xs(xs_set.begin(), xs_set.end()), ys(ys_set.begin(), ys_set.end());
    auto edges = [](const std::vector<double> &v, bool log) {
        std::vector<double> e(v.size() + 1);
        auto mid = [log](double a, double b) { return log ? std::sqrt(a * b) : 0.5 * (a + b); };
        for (std::size_t i = 1; i < v.size(); ++i) e[i] = mid(v[i - 1], v[i]);
        if (v.size() == 1) {
            e[0] = log ? v[0] / 1.5 : v[0] - 0.5;
            e[1] = log ? v[0] * 1.5 : v[0] + 0.5;
        } else {
            e[0] = log ? v[0] * v[0] / e[1] : 2 * v[0] - e[1];
            e.back() = log ? v.back() * v.back() / e[v.size() - 1] : 2 * v.back() - e[v.size() - 1];
        }
        return e;
    };
    const auto ex = edges(xs, spec.log_x), ey = edges(ys, spec.log_y);
    const double W = 640, H = 480, L = 80, R = 120, T = 40, B = 60;
    const svg::Axis ax{ex.front(), ex.back(), spec.log_x, L, W - R};
    const svg::Axis ay{ey.front(), ey.back(), spec.log_y, H - B, T};

    auto transform = [&](double v) { return spec.log_value ? std::log10(std::max(v, 1e-300)) : v; };
    double vlo = std::numeric_limits<double>::infinity(), vhi = -vlo;
    for (const auto &[k, v] : cells)
        if (!std::isnan(v) && !std::isinf(v)) vlo = std::min(vlo, transform(v)), vhi = std::max(vhi, transform(v));
    if (spec.vmin) vlo = transform(*spec.vmin);
    if (spec.vmax) vhi = transform(*spec.vmax);
    if (!(vlo < vhi)) vhi = vlo + 1.0;

    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" font-family=\"sans-serif\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    for (std::size_t i = 0; i < xs.size(); ++i)
        for (std::size_t j = 0; j < ys.size(); ++j) {
            auto it = cells.find({xs[i], ys[j]});
            const bool have = it != cells.end() && !std::isnan(it->second);
            const std::string fill = have ? svg::colormap((transform(it->second) - vlo) / (vhi - vlo)) : "#dddddd";
            const double x0 = ax(ex[i]), x1 = ax(ex[i + 1]), y0 = ay(ey[j + 1]), y1 = ay(ey[j]);
            o << "<rect x=\"" << svg::num(x0) << "\" y=\"" << svg::num(y0) << "\" width=\"" << svg::num(x1 - x0 + 0.3)
              << "\" height=\"" << svg::num(y1 - y0 + 0.3) << "\" fill=\"" << fill << "\"/>\n";
        }
    for (const auto &s : spec.overlays) svg::polyline(o, ax, ay, s, s.color.value_or("#00c000"));
    svg::frame(o, ax, ay, spec.x, spec.y, spec.title.empty() ? spec.value : spec.title);

    const double cx = W - R + 30, cw = 18;
    for (int k = 0; k < 50; ++k) {
        const double f0 = k / 50.0;
        const double y = ay.p0 + (ay.p1 - ay.p0) * (f0 + 0.02);
        o << "<rect x=\"" << cx << "\" y=\"" << svg::num(y - (ay.p0 - ay.p1) / 50.0) << "\" width=\"" << cw
          << "\" height=\"" << svg::num((ay.p0 - ay.p1) / 50.0 + 0.5) << "\" fill=\"" << svg::colormap(f0 + 0.01)
          << "\"/>\n";
    }
    const std::string prefix = spec.log_value ? "1e" : "";
    auto label = [&](double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, spec.log_value ? "%.1f" : "%.3g", v);
        return prefix + buf;
    };
    o << "<text x=\"" << cx + cw + 4 << "\" y=\"" << svg::num(ay.p0) << "\" font-size=\"11\">" << label(vlo) << "</text>\n";
    o << "<text x=\"" << cx + cw + 4 << "\" y=\"" << svg::num(ay.p1 + 10) << "\" font-size=\"11\">" << label(vhi)
      << "</text>\n";
    for (const auto &s : spec.overlays) {
        if (s.points.empty()) continue;
        const auto [x, y] = s.points.back();
        o << "<text x=\"" << svg::num(std::min(ax(x), ax.p1) - 4) << "\" y=\"" << svg::num(std::max(ay(y), ay.p1) + 14)
          << "\" font-size=\"11\" text-anchor=\"end\" paint-order=\"stroke\" stroke=\"white\" stroke-width=\"3\" fill=\"" << s.color.value_or("#00c000") << "\">"
          << svg::esc(s.label) << "</text>\n";
    }
    o << "</svg>\n";
    return o.str();
}

/// One polyline per group of rows (grouped by the listed columns).
[[nodiscard]] inline std::vector<Series> series_from_rows(const SweepResult &res, const CurveSpec &spec) {
    std::map<std::string, Series> groups;
    std::vector<std::string> order;
    for (const auto &r : res.rows) {
        if (r.status != "ok") continue;
        std::string key;
        for (const auto &g : spec.group) {
            if (g == "model") {
                if (!key.empty()) key += " ";
                key += r.model;
            } else if (!std::isnan(column(r, g))) {
                if (!key.empty()) key += " ";
                key += g + "=" + svg::tick_label(column(r, g));
            }
        }
        if (!groups.contains(key)) {
            order.push_back(key);
            groups[key].label = key;
        }
        groups[key].points.emplace_back(column(r, spec.x), column(r, spec.y));
    }
    std::vector<Series> out;
    for (const auto &k : order) {
        auto s = groups[k];
        std::sort(s.points.begin(), s.points.end());
        out.push_back(std::move(s));
    }
    return out;
}

[[nodiscard]] inline std::string render_curves(const std::vector<Series> &series, const CurveSpec &spec) {
    std::vector<double> xv, yv;
    for (const auto &s : series)
        for (const auto &[x, y] : s.points) xv.push_back(x), yv.push_back(y);
    const auto [xlo, xhi] = svg::extent(xv, spec.log_x);
    const auto [ylo, yhi] = svg::extent(yv, spec.log_y);
    const double W = 720, H = 480, L = 80, R = 200, T = 40, B = 60;
    const svg::Axis ax{xlo, xhi, spec.log_x, L, W - R};
    const svg::Axis ay{ylo, yhi, spec.log_y, H - B, T};
    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" font-family=\"sans-serif\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    for (std::size_t i = 0; i < series.size(); ++i) {
        const auto color = series[i].color.value_or(svg::palette[i % svg::palette.size()]);
        svg::polyline(o, ax, ay, series[i], color);
        const double ly = T + 14.0 * static_cast<double>(i) + 10;
        o << "<line x1=\"" << W - R + 12 << "\" y1=\"" << ly - 4 << "\" x2=\"" << W - R + 32 << "\" y2=\"" << ly - 4
          << "\" stroke=\"" << color << "\" stroke-width=\"2\"" << (series[i].dashed ? " stroke-dasharray=\"4,3\"" : "")
          << "/>\n<text x=\"" << W - R + 36 << "\" y=\"" << ly << "\" font-size=\"11\">" << svg::esc(series[i].label)
          << "</text>\n";
    }
    svg::frame(o, ax, ay, spec.x_label.empty() ? spec.x : spec.x_label, spec.y_label.empty() ? spec.y : spec.y_label,
               spec.title);
    o << "</svg>\n";
    return o.str();
}

} // namespace dqa
