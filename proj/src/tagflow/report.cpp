#include "tagflow/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "tagflow/error.hpp"

namespace tagflow {

namespace {

std::string num(double v)
{
    if (std::isnan(v))
        return "nan";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double parse_num(const std::string& s, const std::string& where)
{
    if (s == "nan")
        return std::nan("");
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used == s.size())
            return v;
    } catch (const std::exception&) {
    }
    fail(ErrorKind::io, "bad number '" + s + "' in " + where);
}

std::string fixed(double v, int digits)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

} // namespace

std::string format_metrics_csv(std::span<const MetricRow> rows)
{
    std::string out = kMetricsHeader;
    out += '\n';
    for (const MetricRow& r : rows) {
        out += std::string(to_string(r.method)) + "," + std::to_string(r.frame) + "," +
               (r.slice < 0 ? std::string("volume") : std::to_string(r.slice)) + "," + num(r.ssim) + "," +
               num(r.corr) + "," + num(r.median_epe_mm) + "," + num(r.max_epe_mm) + "," + num(r.jump_fraction) +
               "\n";
    }
    return out;
}

void write_metrics_csv(const std::filesystem::path& path, std::span<const MetricRow> rows)
{
    write_text_file(path, format_metrics_csv(rows));
}

std::vector<MetricRow> read_metrics_csv(const std::filesystem::path& path)
{
    std::istringstream in(read_text_file(path));
    std::string line;
    if (!std::getline(in, line) || line != kMetricsHeader)
        fail(ErrorKind::io, "unexpected metrics header in " + path.string());
    std::vector<MetricRow> rows;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        std::vector<std::string> f;
        std::istringstream ls(line);
        for (std::string cell; std::getline(ls, cell, ',');)
            f.push_back(cell);
        if (f.size() != 8)
            fail(ErrorKind::io, "malformed metrics row in " + path.string());
        MetricRow r;
        try {
            r.method = parse_method(f[0]);
        } catch (const Error&) {
            fail(ErrorKind::io, "unknown method '" + f[0] + "' in " + path.string());
        }
        r.frame = static_cast<int>(parse_num(f[1], path.string()));
        r.slice = f[2] == "volume" ? -1 : static_cast<int>(parse_num(f[2], path.string()));
        r.ssim = parse_num(f[3], path.string());
        r.corr = parse_num(f[4], path.string());
        r.median_epe_mm = parse_num(f[5], path.string());
        r.max_epe_mm = parse_num(f[6], path.string());
        r.jump_fraction = parse_num(f[7], path.string());
        rows.push_back(r);
    }
    return rows;
}

void write_pgm(const std::filesystem::path& path, const Slice2D& slice, double lo, double hi)
{
    if (!(hi > lo))
        fail(ErrorKind::invalid_argument, "write_pgm: empty intensity range");
    std::string out = "P5\n" + std::to_string(slice.width) + " " + std::to_string(slice.height) + "\n255\n";
    for (int y = slice.height - 1; y >= 0; --y)
        for (int x = 0; x < slice.width; ++x) {
            const double t = std::clamp((slice.at(x, y) - lo) / (hi - lo), 0.0, 1.0);
            out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(t * 255.0))));
        }
    write_text_file(path, out);
}

std::string render_svg_chart(std::span<const MetricRow> rows, std::optional<int> marker_frame)
{
    std::map<Method, std::vector<const MetricRow*>> series;
    int fmin = 1 << 30, fmax = -(1 << 30);
    double lo = 1.0;
    for (const MetricRow& r : rows) {
        if (r.slice != -1)
            continue;
        series[r.method].push_back(&r);
        fmin = std::min(fmin, r.frame);
        fmax = std::max(fmax, r.frame);
        lo = std::min({lo, r.ssim, r.corr});
    }
    if (series.empty())
        fail(ErrorKind::invalid_argument, "render_svg_chart: no volume rows");
    if (fmax == fmin)
        ++fmax;
    lo = std::floor(lo * 10.0) / 10.0;
    const double hi = 1.0;
    if (lo >= hi)
        lo = hi - 0.1;

    const double pw = 360, ph = 260, left = 60, top = 40, gap = 80;
    const double width = left + 2 * pw + gap + 30, height = top + ph + 90;
    const char* colors[] = {"#d62728", "#1f77b4", "#2ca02c"};
    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    for (int panel = 0; panel < 2; ++panel) {
        const double x0 = left + panel * (pw + gap);
        auto px = [&](double f) { return x0 + (f - fmin) / (fmax - fmin) * pw; };
        auto py = [&](double v) { return top + (hi - v) / (hi - lo) * ph; };
        s << "<text x=\"" << x0 + pw / 2 << "\" y=\"" << top - 15 << "\" text-anchor=\"middle\">"
          << (panel == 0 ? "SSIM" : "CORR") << "</text>\n";
        s << "<rect x=\"" << x0 << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
          << "\" fill=\"none\" stroke=\"black\"/>\n";
        for (int t = 0; t <= 5; ++t) {
            const double v = lo + (hi - lo) * t / 5.0;
            s << "<line x1=\"" << x0 - 4 << "\" y1=\"" << py(v) << "\" x2=\"" << x0 << "\" y2=\"" << py(v)
              << "\" stroke=\"black\"/>\n";
            s << "<text x=\"" << x0 - 7 << "\" y=\"" << py(v) + 4 << "\" text-anchor=\"end\">" << fixed(v, 2)
              << "</text>\n";
        }
        const int step = std::max(1, (fmax - fmin) / 8);
        for (int f = fmin; f <= fmax; f += step) {
            s << "<line x1=\"" << px(f) << "\" y1=\"" << top + ph << "\" x2=\"" << px(f) << "\" y2=\""
              << top + ph + 4 << "\" stroke=\"black\"/>\n";
            s << "<text x=\"" << px(f) << "\" y=\"" << top + ph + 18 << "\" text-anchor=\"middle\">" << f
              << "</text>\n";
        }
        s << "<text x=\"" << x0 + pw / 2 << "\" y=\"" << top + ph + 36 << "\" text-anchor=\"middle\">frame</text>\n";
        if (marker_frame && *marker_frame >= fmin && *marker_frame <= fmax)
            s << "<line x1=\"" << px(*marker_frame) << "\" y1=\"" << top << "\" x2=\"" << px(*marker_frame)
              << "\" y2=\"" << top + ph << "\" stroke=\"#2ca02c\" stroke-dasharray=\"6,4\"/>\n";
        for (const auto& [method, pts] : series) {
            s << "<polyline fill=\"none\" stroke-width=\"1.5\" stroke=\"" << colors[static_cast<int>(method)]
              << "\" points=\"";
            for (const MetricRow* r : pts)
                s << fixed(px(r->frame), 2) << "," << fixed(py(panel == 0 ? r->ssim : r->corr), 2) << " ";
            s << "\"/>\n";
        }
    }
    double lx = left;
    for (const auto& [method, pts] : series) {
        s << "<line x1=\"" << lx << "\" y1=\"" << height - 25 << "\" x2=\"" << lx + 25 << "\" y2=\"" << height - 25
          << "\" stroke-width=\"2\" stroke=\"" << colors[static_cast<int>(method)] << "\"/>\n";
        s << "<text x=\"" << lx + 30 << "\" y=\"" << height - 21 << "\">" << to_string(method) << "</text>\n";
        lx += 140;
    }
    s << "</svg>\n";
    return s.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text)
{
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f)
        fail(ErrorKind::io, "cannot write " + path.string());
    f.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!f)
        fail(ErrorKind::io, "write failed: " + path.string());
}

std::string read_text_file(const std::filesystem::path& path)
{
    std::ifstream f(path, std::ios::binary);
    if (!f)
        fail(ErrorKind::io, "cannot read " + path.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

} // namespace tagflow
