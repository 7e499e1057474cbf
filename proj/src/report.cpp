// SPDX-License-Identifier: Apache-2.0
#include "memxbar/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "memxbar/config.hpp"
#include "memxbar/error.hpp"
#include "memxbar/tolerance.hpp"

namespace memxbar::report {

namespace fs = std::filesystem;

std::size_t Table::column(const std::string& name) const
{
    const auto it = std::find(columns.begin(), columns.end(), name);
    if (it == columns.end()) {
        throw Error(ErrorCode::MissingArtifact, "table has no column '" + name + "'");
    }
    return static_cast<std::size_t>(it - columns.begin());
}

std::vector<double> Table::numbers(const std::string& name) const
{
    const auto c = column(name);
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) {
        if (c >= r.size()) {
            throw Error(ErrorCode::IoError, "short row in column '" + name + "'");
        }
        out.push_back(std::strtod(r[c].c_str(), nullptr));
    }
    return out;
}

Table parse_table(const std::string& csv, const std::string& what)
{
    Table t;
    std::istringstream in(csv);
    std::string line;
    auto split = [](const std::string& l) {
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ls(l);
        while (std::getline(ls, cell, ',')) {
            cells.push_back(cell);
        }
        return cells;
    };
    if (std::getline(in, line)) {
        t.columns = split(line);
    }
    while (std::getline(in, line)) {
        if (!line.empty()) {
            t.rows.push_back(split(line));
        }
    }
    if (t.rows.empty()) {
        throw Error(ErrorCode::MissingArtifact, what + " has no data");
    }
    return t;
}

namespace {

std::string num(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string label(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

std::string escape(const std::string& s)
{
    std::string out;
    for (char c : s) {
        switch (c) {
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '&': out += "&amp;"; break;
        default: out += c;
        }
    }
    return out;
}

/// Fixed-size canvas with one linear or log10 y axis.
class Chart {
public:
    Chart(std::string title, std::string x_label, std::string y_label, double x0, double x1, double y0,
          double y1, bool log_y = false)
        : log_y_(log_y), x0_(x0), x1_(x1 > x0 ? x1 : x0 + 1.0)
    {
        if (log_y_) {
            y0 = std::log10(std::max(y0, 1e-12));
            y1 = std::log10(std::max(y1, 1e-12));
        }
        y0_ = y0;
        y1_ = y1 > y0 ? y1 : y0 + 1.0;
        out_ << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
             << "\" viewBox=\"0 0 " << kW << " " << kH << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
             << "<rect width=\"" << kW << "\" height=\"" << kH << "\" fill=\"white\"/>\n"
             << "<text x=\"" << kW / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">"
             << escape(title) << "</text>\n"
             << "<text x=\"" << kW / 2 << "\" y=\"" << kH - 10 << "\" text-anchor=\"middle\">" << escape(x_label)
             << "</text>\n"
             << "<text x=\"16\" y=\"" << kH / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
             << kH / 2 << ")\">" << escape(y_label) << "</text>\n";
        axes();
    }

    [[nodiscard]] double px(double x) const { return kL + (x - x0_) / (x1_ - x0_) * (kW - kL - kR); }
    [[nodiscard]] double py(double y) const
    {
        if (log_y_) {
            y = std::log10(std::max(y, 1e-12));
        }
        return kH - kB - (y - y0_) / (y1_ - y0_) * (kH - kT - kB);
    }

    void polyline(const std::vector<double>& x, const std::vector<double>& y, const std::string& color,
                  bool dashed = false)
    {
        out_ << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\""
             << (dashed ? " stroke-dasharray=\"5 3\"" : "") << " points=\"";
        for (std::size_t i = 0; i < x.size(); ++i) {
            out_ << (i ? " " : "") << num(px(x[i])) << "," << num(py(y[i]));
        }
        out_ << "\"/>\n";
    }

    void line(double xa, double ya, double xb, double yb, const std::string& color, bool dashed = false)
    {
        out_ << "<line x1=\"" << num(px(xa)) << "\" y1=\"" << num(py(ya)) << "\" x2=\"" << num(px(xb))
             << "\" y2=\"" << num(py(yb)) << "\" stroke=\"" << color << "\""
             << (dashed ? " stroke-dasharray=\"5 3\"" : "") << "/>\n";
    }

    void rect(double xa, double ya, double xb, double yb, const std::string& fill)
    {
        const double l = std::min(px(xa), px(xb));
        const double t = std::min(py(ya), py(yb));
        out_ << "<rect x=\"" << num(l) << "\" y=\"" << num(t) << "\" width=\"" << num(std::abs(px(xb) - px(xa)))
             << "\" height=\"" << num(std::abs(py(yb) - py(ya))) << "\" fill=\"" << fill
             << "\" stroke=\"black\"/>\n";
    }

    void dot(double x, double y, const std::string& color)
    {
        out_ << "<circle cx=\"" << num(px(x)) << "\" cy=\"" << num(py(y)) << "\" r=\"3\" fill=\"" << color
             << "\"/>\n";
    }

    void text(double x, double y, const std::string& s, const char* anchor = "middle")
    {
        out_ << "<text x=\"" << num(px(x)) << "\" y=\"" << num(py(y)) << "\" text-anchor=\"" << anchor << "\">"
             << escape(s) << "</text>\n";
    }

    void x_tick(double x, const std::string& s)
    {
        out_ << "<text x=\"" << num(px(x)) << "\" y=\"" << kH - kB + 16 << "\" text-anchor=\"middle\">"
             << escape(s) << "</text>\n";
    }

    void legend(int slot, const std::string& color, const std::string& s, bool dashed = false)
    {
        const double y = kT + 14 + 16 * slot;
        out_ << "<line x1=\"" << kW - kR - 150 << "\" y1=\"" << y << "\" x2=\"" << kW - kR - 126 << "\" y2=\"" << y
             << "\" stroke=\"" << color << "\" stroke-width=\"2\"" << (dashed ? " stroke-dasharray=\"5 3\"" : "")
             << "/>\n<text x=\"" << kW - kR - 120 << "\" y=\"" << y + 4 << "\">" << escape(s) << "</text>\n";
    }

    std::string finish()
    {
        out_ << "</svg>\n";
        return out_.str();
    }

private:
    static constexpr int kW = 640;
    static constexpr int kH = 400;
    static constexpr int kL = 70;
    static constexpr int kR = 20;
    static constexpr int kT = 40;
    static constexpr int kB = 50;

    void axes()
    {
        out_ << "<line x1=\"" << kL << "\" y1=\"" << kH - kB << "\" x2=\"" << kW - kR << "\" y2=\"" << kH - kB
             << "\" stroke=\"black\"/>\n<line x1=\"" << kL << "\" y1=\"" << kT << "\" x2=\"" << kL << "\" y2=\""
             << kH - kB << "\" stroke=\"black\"/>\n";
        for (int i = 0; i <= 4; ++i) {
            const double v = y0_ + (y1_ - y0_) * i / 4.0;
            const double y = kH - kB - (kH - kT - kB) * i / 4.0;
            out_ << "<text x=\"" << kL - 6 << "\" y=\"" << num(y + 4) << "\" text-anchor=\"end\">"
                 << label(log_y_ ? std::pow(10.0, v) : v) << "</text>\n";
        }
    }

    std::ostringstream out_;
    bool log_y_;
    double x0_, x1_, y0_ = 0.0, y1_ = 1.0;
};

std::pair<double, double> extent(const std::vector<double>& v)
{
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    return {*lo, *hi};
}

}  // namespace

std::string learning_curve_svg(const Table& curve)
{
    const auto epoch = curve.numbers("epoch");
    const auto mse = curve.numbers("mse");
    const auto [e0, e1] = extent(epoch);
    const auto [m0, m1] = extent(mse);
    Chart c("Learning curve", "epoch", "MSE", e0, e1, m0, m1, true);
    c.polyline(epoch, mse, "#1f77b4");
    return c.finish();
}

std::string boxplot_svg(const Table& trials, double x_p)
{
    const std::vector<std::pair<std::string, std::string>> groups{
        {"p_err", "all"}, {"p_err_stimulus", "S1-S4"}, {"p_err_extraneous", "Sr"}};
    double top = x_p;
    for (const auto& [col, name] : groups) {
        const auto v = trials.numbers(col);
        top = std::max(top, extent(v).second);
    }
    Chart c("P_err over " + std::to_string(trials.rows.size()) + " trials", "test subset", "P_err, %", 0.0,
            static_cast<double>(groups.size()), 0.0, top * 1.1);
    for (std::size_t g = 0; g < groups.size(); ++g) {
        const auto v = trials.numbers(groups[g].first);
        const double x = static_cast<double>(g) + 0.5;
        const double q1 = tolerance::percentile(v, 25.0);
        const double q2 = tolerance::percentile(v, 50.0);
        const double q3 = tolerance::percentile(v, 75.0);
        const auto [lo, hi] = extent(v);
        c.line(x, lo, x, q1, "black");
        c.line(x, q3, x, hi, "black");
        c.line(x - 0.1, lo, x + 0.1, lo, "black");
        c.line(x - 0.1, hi, x + 0.1, hi, "black");
        c.rect(x - 0.2, q1, x + 0.2, q3, "#aec7e8");
        c.line(x - 0.2, q2, x + 0.2, q2, "#d62728");
        c.x_tick(x, groups[g].second);
    }
    c.line(0.0, x_p, static_cast<double>(groups.size()), x_p, "#d62728", true);
    c.legend(0, "#d62728", "X_p = " + label(x_p) + " %", true);
    return c.finish();
}

std::string weight_bounds_svg(const Table& bounds)
{
    const auto low = bounds.numbers("low");
    const auto high = bounds.numbers("high");
    const auto rel = bounds.numbers("relative");
    double lo = 0.0;
    double hi = 0.0;
    for (std::size_t i = 0; i < low.size(); ++i) {
        if (rel[i] != 0.0) {
            lo = std::min(lo, low[i]);
            hi = std::max(hi, high[i]);
        }
    }
    const double n = static_cast<double>(low.size());
    Chart c("Weight error bounds", "synapse index", "weight error, %", 0.0, n, lo * 1.1, hi * 1.1);
    c.line(0.0, 0.0, n, 0.0, "black", true);
    for (std::size_t i = 0; i < low.size(); ++i) {
        if (rel[i] != 0.0) {
            const double x = static_cast<double>(i) + 0.5;
            c.line(x, low[i], x, high[i], "#2ca02c");
        }
    }
    return c.finish();
}

std::string sweep_svg(const Table& sweep, double x_p)
{
    const auto n = sweep.numbers("n_states");
    const auto rounded = sweep.numbers("p_err_rounded");
    const auto refit = sweep.numbers("p_err");
    const auto [n0, n1] = extent(n);
    const double top = std::max({x_p, extent(rounded).second, extent(refit).second});
    Chart c("Discrete resistance states", "resistance states n", "P_err, %", n0, n1, 0.0, top * 1.1);
    c.polyline(n, rounded, "#7f7f7f", true);
    c.polyline(n, refit, "#1f77b4");
    for (std::size_t i = 0; i < n.size(); ++i) {
        c.dot(n[i], refit[i], "#1f77b4");
        c.x_tick(n[i], label(n[i]));
    }
    c.line(n0, x_p, n1, x_p, "#d62728", true);
    c.legend(0, "#1f77b4", "rounded + refit");
    c.legend(1, "#7f7f7f", "rounded", true);
    c.legend(2, "#d62728", "X_p", true);
    return c.finish();
}

std::vector<fs::path> emit_report(const fs::path& run_dir, const fs::path& out_dir, double x_p)
{
    struct Job {
        fs::path source;
        const char* output;
        std::string (*render)(const Table&, double);
    };
    const std::vector<Job> jobs{
        {run_dir / "train" / "learning_curve.csv", "learning_curve.svg",
         [](const Table& t, double) { return learning_curve_svg(t); }},
        {run_dir / "analyze" / "trials.csv", "p_err_boxplot.svg", &boxplot_svg},
        {run_dir / "analyze" / "weight_bounds.csv", "weight_bounds.svg",
         [](const Table& t, double) { return weight_bounds_svg(t); }},
        {run_dir / "sweep" / "sweep.csv", "sweep.svg", &sweep_svg},
    };
    std::vector<fs::path> written;
    for (const auto& job : jobs) {
        const auto table = parse_table(config::read_file(job.source), job.source.string());
        const auto path = out_dir / job.output;
        config::write_file(path, job.render(table, x_p));
        written.push_back(path);
    }
    return written;
}

}  // namespace memxbar::report
