#include "fibredist/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace fibredist::svg {

namespace {

constexpr double kWidth = 640;
constexpr double kHeight = 420;
constexpr double kLeft = 70, kRight = 20, kTop = 40, kBottom = 50;

std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    std::string s = buf;
    if (s == "-0.00") s = "0.00";
    return s;
}

std::string open(double w, double h, const std::string& title) {
    std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(w) + "\" height=\"" + num(h) +
                    "\" viewBox=\"0 0 " + num(w) + " " + num(h) + "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    s += "<text x=\"" + num(w / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" + escape(title) +
         "</text>\n";
    return s;
}

std::string placeholder(const std::string& title, const std::string& note) {
    std::string s = open(kWidth, kHeight, title);
    s += "<text x=\"" + num(kWidth / 2) + "\" y=\"" + num(kHeight / 2) + "\" text-anchor=\"middle\">" +
         escape(note) + "</text>\n</svg>\n";
    return s;
}

struct Axis {
    double lo = 0, hi = 1;
    double pixel_lo = 0, pixel_hi = 1;
    double operator()(double v) const { return pixel_lo + (v - lo) / (hi - lo) * (pixel_hi - pixel_lo); }
};

Axis make_axis(double lo, double hi, double pixel_lo, double pixel_hi) {
    if (!(hi > lo)) {
        const double pad = std::max(1.0, std::abs(lo) * 0.05);
        lo -= pad;
        hi += pad;
    }
    return {lo, hi, pixel_lo, pixel_hi};
}

std::string line(double x1, double y1, double x2, double y2, const std::string& extra) {
    return "<line x1=\"" + num(x1) + "\" y1=\"" + num(y1) + "\" x2=\"" + num(x2) + "\" y2=\"" + num(y2) + "\" " +
           extra + "/>\n";
}

std::string text(double x, double y, const std::string& body, const std::string& anchor = "middle") {
    return "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" text-anchor=\"" + anchor + "\">" + escape(body) +
           "</text>\n";
}

std::string frame(const Axis& x, const Axis& y, const std::string& x_label, const std::string& y_label) {
    std::string s;
    s += line(x.pixel_lo, y.pixel_lo, x.pixel_hi, y.pixel_lo, "stroke=\"black\"");
    s += line(x.pixel_lo, y.pixel_lo, x.pixel_lo, y.pixel_hi, "stroke=\"black\"");
    for (int t = 0; t <= 4; ++t) {
        const double vx = x.lo + (x.hi - x.lo) * t / 4.0;
        const double vy = y.lo + (y.hi - y.lo) * t / 4.0;
        s += text(x(vx), y.pixel_lo + 15, num(vx));
        s += text(x.pixel_lo - 5, y(vy) + 4, num(vy), "end");
    }
    s += text((x.pixel_lo + x.pixel_hi) / 2, kHeight - 12, x_label);
    s += "<text x=\"16\" y=\"" + num((y.pixel_lo + y.pixel_hi) / 2) +
         "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " + num((y.pixel_lo + y.pixel_hi) / 2) + ")\">" +
         escape(y_label) + "</text>\n";
    return s;
}

std::string diverging_colour(double r) {
    r = std::clamp(r, -1.0, 1.0);
    const int fade = static_cast<int>(std::lround(255 * (1 - std::abs(r))));
    char buf[16];
    if (r >= 0) std::snprintf(buf, sizeof buf, "#%02x%02xff", fade, fade);
    else std::snprintf(buf, sizeof buf, "#ff%02x%02x", fade, fade);
    return buf;
}

}  // namespace

std::string escape(const std::string& in) {
    std::string out;
    for (char c : in) {
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

std::string histogram(const std::vector<double>& values, double marker, const std::string& title,
                      const std::string& x_label) {
    if (values.empty()) return placeholder(title, "no values to plot");
    auto [mn, mx] = std::minmax_element(values.begin(), values.end());
    double lo = std::min(*mn, marker), hi = std::max(*mx, marker);
    if (!(hi > lo)) {
        lo -= 1;
        hi += 1;
    }
    const auto bins = static_cast<std::size_t>(std::ceil(std::log2(static_cast<double>(values.size())))) + 1;
    std::vector<std::size_t> count(bins, 0);
    const double width = (hi - lo) / static_cast<double>(bins);
    for (double v : values) {
        auto b = static_cast<std::size_t>((v - lo) / width);
        count[std::min(b, bins - 1)] += 1;
    }
    const double top = static_cast<double>(*std::max_element(count.begin(), count.end()));
    const Axis x = make_axis(lo, hi, kLeft, kWidth - kRight);
    const Axis y = make_axis(0, top, kHeight - kBottom, kTop);
    std::string s = open(kWidth, kHeight, title);
    for (std::size_t b = 0; b < bins; ++b) {
        const double x0 = x(lo + width * static_cast<double>(b));
        const double x1 = x(lo + width * static_cast<double>(b + 1));
        const double y0 = y(static_cast<double>(count[b]));
        s += "<rect x=\"" + num(x0) + "\" y=\"" + num(y0) + "\" width=\"" + num(x1 - x0) + "\" height=\"" +
             num(y.pixel_lo - y0) + "\" fill=\"#9ecae1\" stroke=\"#3182bd\"/>\n";
    }
    s += frame(x, y, x_label, "count");
    s += line(x(marker), y.pixel_lo, x(marker), y.pixel_hi, "stroke=\"#d62728\" stroke-width=\"2\" stroke-dasharray=\"2,3\"");
    s += text(x(marker), y.pixel_hi - 4, "prediction " + num(marker));
    s += "</svg>\n";
    return s;
}

std::string scatter_with_unity(const Vector& observed, const Vector& predicted, const std::string& title) {
    if (observed.size() == 0) return placeholder(title, "no out-of-fold predictions");
    const double lo = std::min(observed.minCoeff(), predicted.minCoeff());
    const double hi = std::max(observed.maxCoeff(), predicted.maxCoeff());
    const Axis x = make_axis(lo, hi, kLeft, kWidth - kRight);
    const Axis y = make_axis(lo, hi, kHeight - kBottom, kTop);
    std::string s = open(kWidth, kHeight, title);
    s += frame(x, y, "observed (nm)", "predicted (nm)");
    s += line(x(x.lo), y(x.lo), x(x.hi), y(x.hi), "stroke=\"gray\" stroke-dasharray=\"4,3\"");
    for (Eigen::Index i = 0; i < observed.size(); ++i) {
        s += "<circle cx=\"" + num(x(observed(i))) + "\" cy=\"" + num(y(predicted(i))) +
             "\" r=\"2.5\" fill=\"#3182bd\" fill-opacity=\"0.6\"/>\n";
    }
    s += "</svg>\n";
    return s;
}

std::string bar_chart(const std::vector<std::string>& labels, const std::vector<double>& values,
                      const std::string& title) {
    if (labels.empty()) return placeholder(title, "no importance scores");
    const double left = 150;
    const double row = 18;
    const double height = kTop + row * static_cast<double>(labels.size()) + kBottom;
    double hi = *std::max_element(values.begin(), values.end());
    if (!(hi > 0)) hi = 1;
    const Axis x{0, hi, left, kWidth - kRight - 40};
    std::string s = open(kWidth, height, title);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const double y0 = kTop + row * static_cast<double>(i);
        s += text(left - 6, y0 + row * 0.7, labels[i], "end");
        s += "<rect x=\"" + num(left) + "\" y=\"" + num(y0 + 2) + "\" width=\"" + num(x(values[i]) - left) +
             "\" height=\"" + num(row - 4) + "\" fill=\"#6baed6\"/>\n";
        s += text(x(values[i]) + 4, y0 + row * 0.7, num(values[i]), "start");
    }
    s += "</svg>\n";
    return s;
}

std::string shap_dots(const std::vector<std::string>& features, const std::vector<std::vector<double>>& phi,
                      const std::vector<std::vector<double>>& values, const std::string& title) {
    double lo = 0, hi = 0;
    bool any = false;
    for (const auto& col : phi) {
        for (double v : col) {
            lo = any ? std::min(lo, v) : v;
            hi = any ? std::max(hi, v) : v;
            any = true;
        }
    }
    if (!any) return placeholder(title, "no SHAP values");
    const double left = 150;
    const double row = 40;
    const double height = kTop + row * static_cast<double>(features.size()) + kBottom;
    const Axis x = make_axis(std::min(lo, 0.0), std::max(hi, 0.0), left, kWidth - kRight);
    std::string s = open(kWidth, height, title);
    s += line(x(0), kTop, x(0), height - kBottom, "stroke=\"gray\"");
    for (std::size_t f = 0; f < features.size(); ++f) {
        const double yc = kTop + row * (static_cast<double>(f) + 0.5);
        s += text(left - 6, yc + 4, features[f], "end");
        const auto& p = phi[f];
        const auto& v = values[f];
        std::vector<std::size_t> order(v.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
        std::vector<double> rank(v.size(), 0.5);
        for (std::size_t i = 0; i < order.size() && order.size() > 1; ++i) {
            rank[order[i]] = static_cast<double>(i) / static_cast<double>(order.size() - 1);
        }
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double jitter = (static_cast<double>(i % 7) - 3) * 2.5;
            const int red = static_cast<int>(std::lround(255 * rank[i]));
            char colour[16];
            std::snprintf(colour, sizeof colour, "#%02x30%02x", red, 255 - red);
            s += "<circle cx=\"" + num(x(p[i])) + "\" cy=\"" + num(yc + jitter) + "\" r=\"2.5\" fill=\"" + colour +
                 "\" fill-opacity=\"0.7\"/>\n";
        }
    }
    s += text((left + kWidth - kRight) / 2, height - 15, "SHAP value (nm); colour low to high feature value");
    s += "</svg>\n";
    return s;
}

std::string heatmap(const std::vector<std::string>& names, const Matrix& r, const std::string& title) {
    if (names.empty()) return placeholder(title, "no correlations");
    const double left = 130, top = 40, cell = 60;
    const auto n = static_cast<double>(names.size());
    const double width = left + cell * n + kRight;
    const double height = top + cell * n + 110;
    std::string s = open(width, height, title);
    for (std::size_t i = 0; i < names.size(); ++i) {
        s += text(left - 6, top + cell * (static_cast<double>(i) + 0.55), names[i], "end");
        const double xc = left + cell * (static_cast<double>(i) + 0.5);
        const double yl = top + cell * n + 8;
        s += "<text x=\"" + num(xc) + "\" y=\"" + num(yl) + "\" text-anchor=\"end\" transform=\"rotate(-45 " +
             num(xc) + " " + num(yl) + ")\">" + escape(names[i]) + "</text>\n";
        for (std::size_t j = 0; j < names.size(); ++j) {
            const double v = r(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            const double x0 = left + cell * static_cast<double>(j);
            const double y0 = top + cell * static_cast<double>(i);
            s += "<rect x=\"" + num(x0) + "\" y=\"" + num(y0) + "\" width=\"" + num(cell) + "\" height=\"" +
                 num(cell) + "\" fill=\"" + (std::isfinite(v) ? diverging_colour(v) : std::string("#dddddd")) +
                 "\" stroke=\"white\"/>\n";
            s += text(x0 + cell / 2, y0 + cell / 2 + 4, std::isfinite(v) ? num(v) : std::string("NA"));
        }
    }
    s += "</svg>\n";
    return s;
}

}  // namespace fibredist::svg
