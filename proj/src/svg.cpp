#include "epi/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

namespace epi {

namespace {

std::string fmt(double v) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(2) << v;
    return os.str();
}

std::string method_color(const std::string& m) {
    if (m == "ggee") return "#e41a1c";
    if (m == "pca") return "#377eb8";
    if (m == "pls") return "#4daf4a";
    return "#984ea3";
}

// White at 0 to #08306b at 1, linear per channel.
std::string heat_color(double v) {
    v = std::clamp(v, 0.0, 1.0);
    int r = static_cast<int>(std::lround(255.0 + (8.0 - 255.0) * v));
    int g = static_cast<int>(std::lround(255.0 + (48.0 - 255.0) * v));
    int b = static_cast<int>(std::lround(255.0 + (107.0 - 255.0) * v));
    char buf[8];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
    return buf;
}

struct Panel {
    std::string setting, model;
    std::vector<double> r2s;
    // method -> power at each r2 (NaN when missing)
    std::map<std::string, std::vector<double>> series;
};

}  // namespace

std::string power_curves_svg(const PowerTable& table) {
    // Collect panels in first-seen order.
    std::vector<Panel> panels;
    std::vector<std::string> methods;
    for (const auto& c : table.cells) {
        Panel* p = nullptr;
        for (auto& q : panels)
            if (q.setting == c.setting && q.model == c.model) p = &q;
        if (!p) {
            panels.push_back({c.setting, c.model, {}, {}});
            p = &panels.back();
        }
        if (std::find(p->r2s.begin(), p->r2s.end(), c.r2) == p->r2s.end())
            p->r2s.push_back(c.r2);
        if (std::find(methods.begin(), methods.end(), c.method) == methods.end())
            methods.push_back(c.method);
    }
    for (auto& p : panels) {
        std::sort(p.r2s.begin(), p.r2s.end());
        for (const auto& m : methods)
            p.series[m].assign(p.r2s.size(), std::nan(""));
    }
    for (const auto& c : table.cells) {
        for (auto& p : panels) {
            if (p.setting != c.setting || p.model != c.model) continue;
            for (size_t i = 0; i < p.r2s.size(); ++i)
                if (std::abs(p.r2s[i] - c.r2) < 1e-12) p.series[c.method][i] = c.power;
        }
    }

    const int pw = 280, ph = 220, ml = 46, mb = 36, mt = 28, mr = 12;
    const int cols = std::max(1, std::min<int>(3, static_cast<int>(panels.size())));
    const int rows = panels.empty() ? 1 : (static_cast<int>(panels.size()) + cols - 1) / cols;
    const int width = cols * pw + 20, height = rows * ph + 40;

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
    svg << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";

    if (panels.empty()) {
        svg << "<line x1=\"" << ml << "\" y1=\"" << (ph - mb) << "\" x2=\"" << (pw - mr)
            << "\" y2=\"" << (ph - mb) << "\" stroke=\"black\"/>\n";
        svg << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\""
            << (ph - mb) << "\" stroke=\"black\"/>\n";
        svg << "<text x=\"" << (pw / 2) << "\" y=\"" << (ph / 2)
            << "\" font-family=\"sans-serif\" font-size=\"14\" text-anchor=\"middle\" "
               "fill=\"#666\">no data</text>\n";
        svg << "</svg>\n";
        return svg.str();
    }

    for (size_t pi = 0; pi < panels.size(); ++pi) {
        const Panel& p = panels[pi];
        int ox = static_cast<int>(pi % static_cast<size_t>(cols)) * pw + 10;
        int oy = static_cast<int>(pi / static_cast<size_t>(cols)) * ph + 10;
        int x0 = ox + ml, y0 = oy + mt, x1 = ox + pw - mr, y1 = oy + ph - mb;
        double rmin = p.r2s.front(), rmax = p.r2s.back();
        if (rmax <= rmin) rmax = rmin + 1.0;
        auto px = [&](double r2) { return x0 + (x1 - x0) * (r2 - rmin) / (rmax - rmin); };
        auto py = [&](double pw_) { return y1 - (y1 - y0) * std::clamp(pw_, 0.0, 1.0); };

        svg << "<text x=\"" << (ox + pw / 2) << "\" y=\"" << (oy + 16)
            << "\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">setting "
            << p.setting << " (" << p.model << " model)</text>\n";
        svg << "<line x1=\"" << x0 << "\" y1=\"" << y1 << "\" x2=\"" << x1 << "\" y2=\"" << y1
            << "\" stroke=\"black\"/>\n";
        svg << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x0 << "\" y2=\"" << y1
            << "\" stroke=\"black\"/>\n";
        for (int t = 0; t <= 4; ++t) {
            double v = t / 4.0;
            svg << "<line x1=\"" << (x0 - 3) << "\" y1=\"" << fmt(py(v)) << "\" x2=\"" << x0
                << "\" y2=\"" << fmt(py(v)) << "\" stroke=\"black\"/>\n";
            svg << "<text x=\"" << (x0 - 6) << "\" y=\"" << fmt(py(v) + 4)
                << "\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"end\">" << fmt(v)
                << "</text>\n";
        }
        for (double r2 : p.r2s) {
            svg << "<line x1=\"" << fmt(px(r2)) << "\" y1=\"" << y1 << "\" x2=\"" << fmt(px(r2))
                << "\" y2=\"" << (y1 + 3) << "\" stroke=\"black\"/>\n";
            svg << "<text x=\"" << fmt(px(r2)) << "\" y=\"" << (y1 + 14)
                << "\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"middle\">"
                << fmt(r2) << "</text>\n";
        }
        svg << "<text x=\"" << (ox + pw / 2) << "\" y=\"" << (y1 + 28)
            << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">target "
               "R^2</text>\n";
        svg << "<text transform=\"translate(" << (ox + 12) << ' ' << ((y0 + y1) / 2)
            << ") rotate(-90)\" font-family=\"sans-serif\" font-size=\"11\" "
               "text-anchor=\"middle\">power</text>\n";

        for (const auto& m : methods) {
            const auto& series = p.series.at(m);
            std::ostringstream pts;
            bool any = false;
            for (size_t i = 0; i < p.r2s.size(); ++i) {
                if (std::isnan(series[i])) continue;
                pts << fmt(px(p.r2s[i])) << ',' << fmt(py(series[i])) << ' ';
                any = true;
            }
            if (!any) continue;
            svg << "<polyline points=\"" << pts.str() << "\" fill=\"none\" stroke=\""
                << method_color(m) << "\" stroke-width=\"1.6\"/>\n";
            for (size_t i = 0; i < p.r2s.size(); ++i) {
                if (std::isnan(series[i])) continue;
                svg << "<circle cx=\"" << fmt(px(p.r2s[i])) << "\" cy=\"" << fmt(py(series[i]))
                    << "\" r=\"2.4\" fill=\"" << method_color(m) << "\"/>\n";
            }
        }
    }

    // Legend along the bottom.
    int lx = 20, ly = rows * ph + 24;
    for (const auto& m : methods) {
        svg << "<line x1=\"" << lx << "\" y1=\"" << (ly - 4) << "\" x2=\"" << (lx + 22)
            << "\" y2=\"" << (ly - 4) << "\" stroke=\"" << method_color(m)
            << "\" stroke-width=\"2\"/>\n";
        svg << "<text x=\"" << (lx + 27) << "\" y=\"" << ly
            << "\" font-family=\"sans-serif\" font-size=\"12\">" << m << "</text>\n";
        lx += 27 + 14 + static_cast<int>(m.size()) * 8;
    }
    svg << "</svg>\n";
    return svg.str();
}

std::string heatmap_svg(const DiscoveryHeatmap& h) {
    const int cell = 22, label_w = 130, header_h = 58, legend_h = 46;
    int nv = static_cast<int>(h.variables.size());
    int nm = static_cast<int>(h.methods.size());
    bool empty = h.iterations == 0 || nv == 0 || nm == 0;
    int grid_w = empty ? 180 : nm * cell;
    int grid_h = empty ? 60 : nv * cell;
    int width = label_w + grid_w + 30;
    int height = header_h + grid_h + legend_h + 20;

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
    svg << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
    svg << "<text x=\"" << (width / 2) << "\" y=\"18\" font-family=\"sans-serif\" "
           "font-size=\"13\" text-anchor=\"middle\">setting "
        << h.setting << " (" << h.model << " model), R^2=" << fmt(h.r2) << "</text>\n";

    if (empty) {
        svg << "<rect x=\"" << label_w << "\" y=\"" << header_h << "\" width=\"" << grid_w
            << "\" height=\"" << grid_h
            << "\" fill=\"none\" stroke=\"#999\" stroke-dasharray=\"4 3\"/>\n";
        svg << "<text x=\"" << (label_w + grid_w / 2) << "\" y=\"" << (header_h + grid_h / 2 + 4)
            << "\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\" "
               "fill=\"#666\">no data</text>\n";
        svg << "</svg>\n";
        return svg.str();
    }

    for (int m = 0; m < nm; ++m) {
        svg << "<text transform=\"translate(" << (label_w + m * cell + cell / 2 + 4) << ' '
            << (header_h - 6) << ") rotate(-40)\" font-family=\"sans-serif\" font-size=\"11\">"
            << h.methods[static_cast<size_t>(m)] << "</text>\n";
    }
    for (int v = 0; v < nv; ++v) {
        svg << "<text x=\"" << (label_w - 6) << "\" y=\"" << (header_h + v * cell + cell / 2 + 4)
            << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">"
            << h.variables[static_cast<size_t>(v)] << "</text>\n";
        for (int m = 0; m < nm; ++m) {
            svg << "<rect x=\"" << (label_w + m * cell) << "\" y=\"" << (header_h + v * cell)
                << "\" width=\"" << cell << "\" height=\"" << cell << "\" fill=\""
                << heat_color(h.freq(v, m)) << "\" stroke=\"#ccc\" stroke-width=\"0.5\"/>\n";
        }
    }

    // Legend: 0 .. 1 gradient in ten steps.
    int ly = header_h + grid_h + 18;
    for (int i = 0; i < 10; ++i) {
        svg << "<rect x=\"" << (label_w + i * 16) << "\" y=\"" << ly
            << "\" width=\"16\" height=\"10\" fill=\"" << heat_color((i + 0.5) / 10.0)
            << "\"/>\n";
    }
    svg << "<text x=\"" << (label_w - 6) << "\" y=\"" << (ly + 9)
        << "\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"end\">0</text>\n";
    svg << "<text x=\"" << (label_w + 166) << "\" y=\"" << (ly + 9)
        << "\" font-family=\"sans-serif\" font-size=\"10\">1</text>\n";
    svg << "</svg>\n";
    return svg.str();
}

}  // namespace epi
