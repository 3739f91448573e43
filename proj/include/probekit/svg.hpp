#pragma once

#include <string>
#include <vector>

#include "probekit/common.hpp"

namespace probekit {

// Just enough SVG to draw layer-accuracy curves: fixed canvas, one polyline
// per series, an optional shaded min/max band, axis ticks, legend. Output is
// deterministic (fixed-precision coordinates) so report files diff cleanly.
struct LinePlot {
    struct Series {
        std::string name;
        std::vector<double> xs, ys;
    };

    std::string title;
    std::string x_label, y_label;
    std::vector<Series> series;
    // Optional band: per x position, a [lo, hi] envelope.
    std::vector<double> band_x, band_lo, band_hi;
    double y_min = 0.0, y_max = 1.0;

    static constexpr int kW = 720, kH = 440;
    static constexpr int kLeft = 64, kRight = 170, kTop = 48, kBottom = 56;

    std::string render() const {
        static const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                         "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
                                         "#bcbd22", "#17becf", "#393b79", "#ad494a"};
        double x_min = 0.0, x_max = 1.0;
        bool has_x = false;
        for (const auto& s : series)
            for (double x : s.xs) {
                if (!has_x) {
                    x_min = x_max = x;
                    has_x = true;
                } else {
                    x_min = std::min(x_min, x);
                    x_max = std::max(x_max, x);
                }
            }
        if (!has_x) x_min = 0.0, x_max = 1.0;
        if (x_max == x_min) x_max = x_min + 1.0;

        const double plot_w = kW - kLeft - kRight;
        const double plot_h = kH - kTop - kBottom;
        auto px = [&](double x) { return kLeft + (x - x_min) / (x_max - x_min) * plot_w; };
        auto py = [&](double y) { return kTop + (y_max - y) / (y_max - y_min) * plot_h; };

        std::string out;
        out += strfmt(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%d\" height=\"%d\" "
            "viewBox=\"0 0 %d %d\" font-family=\"monospace\" font-size=\"12\">\n",
            kW, kH, kW, kH);
        out += strfmt("<rect width=\"%d\" height=\"%d\" fill=\"white\"/>\n", kW, kH);
        out += strfmt("<text x=\"%d\" y=\"24\" font-size=\"14\">%s</text>\n", kLeft,
                      title.c_str());

        if (!band_x.empty()) {
            std::string pts;
            for (size_t i = 0; i < band_x.size(); ++i)
                pts += strfmt("%.2f,%.2f ", px(band_x[i]), py(band_hi[i]));
            for (size_t i = band_x.size(); i-- > 0;)
                pts += strfmt("%.2f,%.2f ", px(band_x[i]), py(band_lo[i]));
            out += "<polygon points=\"" + pts + "\" fill=\"#d0d0d0\" opacity=\"0.5\"/>\n";
        }

        // Axes and ticks.
        out += strfmt("<line x1=\"%d\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" stroke=\"black\"/>\n",
                      kLeft, static_cast<double>(kTop + plot_h), kLeft + plot_w,
                      static_cast<double>(kTop + plot_h));
        out += strfmt("<line x1=\"%d\" y1=\"%d\" x2=\"%d\" y2=\"%.2f\" stroke=\"black\"/>\n",
                      kLeft, kTop, kLeft, static_cast<double>(kTop + plot_h));
        for (int t = 0; t <= 5; ++t) {
            const double y = y_min + (y_max - y_min) * t / 5.0;
            out += strfmt("<text x=\"%d\" y=\"%.2f\" text-anchor=\"end\">%.2f</text>\n",
                          kLeft - 6, py(y) + 4, y);
            out += strfmt(
                "<line x1=\"%d\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" stroke=\"#e0e0e0\"/>\n",
                kLeft, py(y), kLeft + plot_w, py(y));
        }
        const int x_ticks = std::min<int>(10, static_cast<int>(x_max - x_min));
        for (int t = 0; t <= std::max(1, x_ticks); ++t) {
            const double x = x_min + (x_max - x_min) * t / std::max(1, x_ticks);
            out += strfmt("<text x=\"%.2f\" y=\"%.2f\" text-anchor=\"middle\">%.0f</text>\n",
                          px(x), kTop + plot_h + 18, x);
        }
        out += strfmt("<text x=\"%.2f\" y=\"%d\" text-anchor=\"middle\">%s</text>\n",
                      kLeft + plot_w / 2, kH - 12, x_label.c_str());
        out += strfmt(
            "<text x=\"16\" y=\"%.2f\" transform=\"rotate(-90 16 %.2f)\" "
            "text-anchor=\"middle\">%s</text>\n",
            kTop + plot_h / 2, kTop + plot_h / 2, y_label.c_str());

        for (size_t s = 0; s < series.size(); ++s) {
            const char* color = kPalette[s % 12];
            std::string pts;
            for (size_t i = 0; i < series[s].xs.size(); ++i)
                pts += strfmt("%.2f,%.2f ", px(series[s].xs[i]), py(series[s].ys[i]));
            out += "<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"" + color +
                   "\" stroke-width=\"1.5\"/>\n";
            for (size_t i = 0; i < series[s].xs.size(); ++i)
                out += strfmt("<circle cx=\"%.2f\" cy=\"%.2f\" r=\"2.5\" fill=\"%s\"/>\n",
                              px(series[s].xs[i]), py(series[s].ys[i]), color);
            const double ly = kTop + 14.0 * static_cast<double>(s);
            out += strfmt(
                "<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" stroke=\"%s\" "
                "stroke-width=\"2\"/>\n",
                kLeft + plot_w + 12, ly, kLeft + plot_w + 30, ly, color);
            out += strfmt("<text x=\"%.2f\" y=\"%.2f\">%s</text>\n", kLeft + plot_w + 34,
                          ly + 4, series[s].name.c_str());
        }
        out += "</svg>\n";
        return out;
    }
};

}  // namespace probekit
