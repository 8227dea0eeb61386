#include "geminet/pipeline/plot.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>

#include "geminet/error.hpp"

namespace geminet::pipeline {

namespace {

std::vector<std::string> split_row(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        out.push_back(line.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

std::optional<double> to_number(const std::string& s) {
    if (s.empty()) return std::nullopt;
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string tick(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", std::abs(v) < 1e-12 ? 0.0 : v);
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

// Round step of 1, 2 or 5 times a power of ten giving about `n` ticks.
double nice_step(double span, int n) {
    const double raw = span / n;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    const double f = raw / mag;
    return (f < 1.5 ? 1.0 : f < 3.5 ? 2.0 : f < 7.5 ? 5.0 : 10.0) * mag;
}

constexpr const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

}  // namespace

std::size_t CsvTable::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return i;
    throw InputError("no column named '" + name + "'");
}

CsvTable parse_csv(std::string_view text, const std::string& source) {
    CsvTable t;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto cells = split_row(line);
        if (t.header.empty()) {
            t.header = std::move(cells);
            continue;
        }
        if (cells.size() != t.header.size()) {
            throw ParseError(source, line_no,
                             "expected " + std::to_string(t.header.size()) + " cells, found " + std::to_string(cells.size()));
        }
        t.rows.push_back(std::move(cells));
    }
    if (t.rows.empty()) throw DataError(source + ": no data rows");
    return t;
}

CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_csv(ss.str(), path.string());
}

std::string render_svg(const CsvTable& table, const PlotOptions& opt) {
    if (table.rows.empty()) throw DataError("nothing to plot");
    const std::size_t xc = opt.x.empty() ? 0 : table.column(opt.x);
    std::vector<std::size_t> ys;
    if (opt.y.empty()) {
        for (std::size_t c = 0; c < table.header.size(); ++c) {
            if (c == xc) continue;
            const bool numeric = std::any_of(table.rows.begin(), table.rows.end(), [&](const auto& r) { return to_number(r[c]).has_value(); });
            const bool clean = std::all_of(table.rows.begin(), table.rows.end(), [&](const auto& r) { return r[c].empty() || to_number(r[c]); });
            if (numeric && clean) ys.push_back(c);
        }
    } else {
        for (const auto& name : opt.y) ys.push_back(table.column(name));
    }
    if (ys.empty()) throw DataError("no numeric series to plot");

    struct Series {
        std::string name;
        std::vector<std::pair<double, double>> pts;
    };
    std::vector<Series> series;
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (auto c : ys) {
        Series s{table.header[c], {}};
        for (const auto& r : table.rows) {
            const auto x = to_number(r[xc]);
            const auto y = to_number(r[c]);
            if (!x || !y) continue;
            s.pts.emplace_back(*x, *y);
            x0 = std::min(x0, *x), x1 = std::max(x1, *x);
            y0 = std::min(y0, *y), y1 = std::max(y1, *y);
        }
        series.push_back(std::move(s));
    }
    if (!std::isfinite(x0)) throw DataError("no numeric points to plot");
    if (x1 - x0 < 1e-12) x0 -= 0.5, x1 += 0.5;
    if (y1 - y0 < 1e-12) y0 -= 0.5, y1 += 0.5;
    const double pad = 0.04 * (y1 - y0);
    y0 -= pad, y1 += pad;

    const double left = 80, right = 160, top = 40, bottom = 60;
    const double pw = opt.width - left - right, ph = opt.height - top - bottom;
    auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
    auto py = [&](double y) { return top + (1.0 - (y - y0) / (y1 - y0)) * ph; };

    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << opt.width << "\" height=\"" << opt.height
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    if (!opt.title.empty())
        o << "<text x=\"" << fmt(left + pw / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" << escape(opt.title) << "</text>\n";
    o << "<rect x=\"" << fmt(left) << "\" y=\"" << fmt(top) << "\" width=\"" << fmt(pw) << "\" height=\"" << fmt(ph)
      << "\" fill=\"none\" stroke=\"black\"/>\n";

    const double xs = nice_step(x1 - x0, 8), ysz = nice_step(y1 - y0, 6);
    for (double v = std::ceil(x0 / xs) * xs; v <= x1 + 1e-9 * xs; v += xs) {
        o << "<line x1=\"" << fmt(px(v)) << "\" y1=\"" << fmt(top + ph) << "\" x2=\"" << fmt(px(v)) << "\" y2=\""
          << fmt(top + ph + 5) << "\" stroke=\"black\"/>";
        o << "<text x=\"" << fmt(px(v)) << "\" y=\"" << fmt(top + ph + 18) << "\" text-anchor=\"middle\">" << tick(v) << "</text>\n";
    }
    for (double v = std::ceil(y0 / ysz) * ysz; v <= y1 + 1e-9 * ysz; v += ysz) {
        o << "<line x1=\"" << fmt(left - 5) << "\" y1=\"" << fmt(py(v)) << "\" x2=\"" << fmt(left) << "\" y2=\""
          << fmt(py(v)) << "\" stroke=\"black\"/>";
        o << "<text x=\"" << fmt(left - 8) << "\" y=\"" << fmt(py(v) + 4) << "\" text-anchor=\"end\">" << tick(v) << "</text>\n";
    }
    const std::string xl = opt.x_label.empty() ? table.header[xc] : opt.x_label;
    o << "<text x=\"" << fmt(left + pw / 2) << "\" y=\"" << fmt(opt.height - 15.0) << "\" text-anchor=\"middle\">"
      << escape(xl) << "</text>\n";
    if (!opt.y_label.empty()) {
        o << "<text transform=\"translate(18," << fmt(top + ph / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
          << escape(opt.y_label) << "</text>\n";
    }

    for (std::size_t i = 0; i < series.size(); ++i) {
        const auto& s = series[i];
        const char* color = palette[i % std::size(palette)];
        o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t k = 0; k < s.pts.size(); ++k) o << (k ? " " : "") << fmt(px(s.pts[k].first)) << ',' << fmt(py(s.pts[k].second));
        o << "\"/>\n";
        const double ly = top + 14 + 18.0 * static_cast<double>(i);
        o << "<line x1=\"" << fmt(left + pw + 12) << "\" y1=\"" << fmt(ly - 4) << "\" x2=\"" << fmt(left + pw + 32)
          << "\" y2=\"" << fmt(ly - 4) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>";
        o << "<text x=\"" << fmt(left + pw + 38) << "\" y=\"" << fmt(ly) << "\">" << escape(s.name) << "</text>\n";
    }
    o << "</svg>\n";
    return o.str();
}

}  // namespace geminet::pipeline
