#pragma once

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dynlab/stats.hpp"

// Result persistence: the pass/fail ledger, JSON summaries, CSV sample files
// (17 significant digits), and self-contained SVG line plots.

namespace dynlab {

using json = nlohmann::ordered_json;

struct LedgerEntry {
    std::string name;
    bool pass = false;
    double value = 0;
    std::string detail;
};

struct RunLedger {
    std::vector<LedgerEntry> entries;

    void add(const std::string& name, bool pass, double value, const std::string& detail = "") {
        entries.push_back({name, pass, value, detail});
    }

    bool all_pass() const {
        for (const auto& e : entries)
            if (!e.pass) return false;
        return true;
    }

    json to_json() const {
        json arr = json::array();
        for (const auto& e : entries)
            arr.push_back({{"name", e.name}, {"pass", e.pass}, {"value", e.value},
                           {"detail", e.detail}});
        return arr;
    }
};

inline json ci_json(const ConfidenceInterval& ci) {
    return {{"estimate", ci.estimate}, {"lo", ci.lo}, {"hi", ci.hi}, {"stderr", ci.stderr_mean}};
}

// CSV with a header row, one record per sample, floats at 17 significant digits
struct CsvWriter {
    std::ostringstream os;

    explicit CsvWriter(const std::vector<std::string>& header) {
        for (size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << header[i];
        os << "\n";
    }

    void row(const std::vector<double>& values) {
        os << std::setprecision(17);
        for (size_t i = 0; i < values.size(); ++i) os << (i ? "," : "") << values[i];
        os << "\n";
    }

    void write(const std::string& path) const {
        std::ofstream f(path);
        f << os.str();
    }
};

// minimal self-contained SVG line plot
struct SvgPlot {
    int width = 640, height = 420;
    std::string title;
    std::vector<std::pair<std::vector<double>, std::vector<double>>> lines;
    std::vector<std::string> colors;

    void add_line(const std::vector<double>& xs, const std::vector<double>& ys,
                  const std::string& color = "#d62728") {
        lines.push_back({xs, ys});
        colors.push_back(color);
    }

    void write(const std::string& path) const {
        double xlo = 1e300, xhi = -1e300, ylo = 1e300, yhi = -1e300;
        for (const auto& [xs, ys] : lines)
            for (size_t i = 0; i < xs.size(); ++i) {
                xlo = std::min(xlo, xs[i]);
                xhi = std::max(xhi, xs[i]);
                ylo = std::min(ylo, ys[i]);
                yhi = std::max(yhi, ys[i]);
            }
        if (xhi <= xlo) xhi = xlo + 1;
        if (yhi <= ylo) yhi = ylo + 1;
        double padx = 0.08 * (xhi - xlo), pady = 0.08 * (yhi - ylo);
        xlo -= padx;
        xhi += padx;
        ylo -= pady;
        yhi += pady;
        auto px = [&](double x) { return 50 + (x - xlo) / (xhi - xlo) * (width - 70); };
        auto py = [&](double y) { return height - 40 - (y - ylo) / (yhi - ylo) * (height - 70); };
        std::ostringstream s;
        s << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width << "' height='" << height
          << "'>\n<rect width='100%' height='100%' fill='white'/>\n";
        s << "<text x='" << width / 2 << "' y='20' text-anchor='middle' font-size='14'>" << title
          << "</text>\n";
        s << "<line x1='50' y1='" << height - 40 << "' x2='" << width - 20 << "' y2='"
          << height - 40 << "' stroke='black'/>\n";
        s << "<line x1='50' y1='30' x2='50' y2='" << height - 40 << "' stroke='black'/>\n";
        s << std::setprecision(6);
        s << "<text x='50' y='" << height - 22 << "' font-size='11'>" << xlo << "</text>\n";
        s << "<text x='" << width - 80 << "' y='" << height - 22 << "' font-size='11'>" << xhi
          << "</text>\n";
        s << "<text x='4' y='" << height - 44 << "' font-size='11'>" << ylo << "</text>\n";
        s << "<text x='4' y='40' font-size='11'>" << yhi << "</text>\n";
        for (size_t l = 0; l < lines.size(); ++l) {
            s << "<polyline fill='none' stroke='" << colors[l] << "' stroke-width='1.5' points='";
            const auto& [xs, ys] = lines[l];
            for (size_t i = 0; i < xs.size(); ++i) s << px(xs[i]) << "," << py(ys[i]) << " ";
            s << "'/>\n";
        }
        s << "</svg>\n";
        std::ofstream f(path);
        f << s.str();
    }
};

inline void ensure_dir(const std::string& dir) { std::filesystem::create_directories(dir); }

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path);
    f << text;
}

} // namespace dynlab
