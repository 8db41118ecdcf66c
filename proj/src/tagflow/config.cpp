#include "tagflow/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "tagflow/error.hpp"

namespace tagflow {

namespace {

std::string_view trim(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos)
        return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep)
{
    std::vector<std::string_view> parts;
    for (;;) {
        const auto pos = s.find(sep);
        parts.push_back(trim(s.substr(0, pos)));
        if (pos == std::string_view::npos)
            return parts;
        s.remove_prefix(pos + 1);
    }
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view expected)
{
    fail(ErrorKind::config, std::string(key) + ": expected " + std::string(expected) + ", got '" +
                                std::string(value) + "'");
}

double to_double(std::string_view key, std::string_view s)
{
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v))
        bad_value(key, s, "a finite number");
    return v;
}

long long to_integer(std::string_view key, std::string_view s)
{
    long long v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        bad_value(key, s, "an integer");
    return v;
}

int to_int(std::string_view key, std::string_view s)
{
    const long long v = to_integer(key, s);
    if (v < -1000000000LL || v > 1000000000LL)
        bad_value(key, s, "an integer of moderate size");
    return static_cast<int>(v);
}

std::uint64_t to_u64(std::string_view key, std::string_view s)
{
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size())
        bad_value(key, s, "an unsigned 64-bit integer");
    return v;
}

bool to_bool(std::string_view key, std::string_view s)
{
    if (s == "true")
        return true;
    if (s == "false")
        return false;
    bad_value(key, s, "true or false");
}

Vec3 to_vec3(std::string_view key, std::string_view s)
{
    const auto parts = split(s, ',');
    if (parts.size() != 3)
        bad_value(key, s, "three comma-separated numbers");
    return {to_double(key, parts[0]), to_double(key, parts[1]), to_double(key, parts[2])};
}

std::array<int, 3> to_int3(std::string_view key, std::string_view s)
{
    const auto parts = split(s, ',');
    if (parts.size() != 3)
        bad_value(key, s, "three comma-separated integers");
    return {to_int(key, parts[0]), to_int(key, parts[1]), to_int(key, parts[2])};
}

int to_axis(std::string_view key, std::string_view s)
{
    if (s == "x")
        return 0;
    if (s == "y")
        return 1;
    if (s == "z")
        return 2;
    bad_value(key, s, "x, y or z");
}

std::string fmt_double(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fmt_vec3(const Vec3& v)
{
    return fmt_double(v.x) + "," + fmt_double(v.y) + "," + fmt_double(v.z);
}

std::string fmt_bool(bool b) { return b ? "true" : "false"; }

const char* axis_name(int a) { return a == 0 ? "x" : (a == 1 ? "y" : "z"); }

struct Entry {
    std::string key;
    std::function<void(PipelineConfig&, std::string_view)> set;
    std::function<std::string(const PipelineConfig&)> get;
};

const std::vector<Entry>& entries()
{
    static const std::vector<Entry> table = [] {
        std::vector<Entry> t;
        auto num = [&t](std::string key, auto member) {
            t.push_back({key,
                         [key, member](PipelineConfig& c, std::string_view v) { member(c) = to_double(key, v); },
                         [member](const PipelineConfig& c) { return fmt_double(member(c)); }});
        };
        auto integer = [&t](std::string key, auto member) {
            t.push_back({key, [key, member](PipelineConfig& c, std::string_view v) { member(c) = to_int(key, v); },
                         [member](const PipelineConfig& c) {
                             return std::to_string(member(c));
                         }});
        };
        auto flag = [&t](std::string key, auto member) {
            t.push_back({key, [key, member](PipelineConfig& c, std::string_view v) { member(c) = to_bool(key, v); },
                         [member](const PipelineConfig& c) { return fmt_bool(member(c)); }});
        };
        auto triple = [&t](std::string key, auto member) {
            t.push_back({key, [key, member](PipelineConfig& c, std::string_view v) { member(c) = to_vec3(key, v); },
                         [member](const PipelineConfig& c) { return fmt_vec3(member(c)); }});
        };

        t.push_back({"phantom.dims",
                     [](PipelineConfig& c, std::string_view v) { c.phantom.dims = to_int3("phantom.dims", v); },
                     [](const PipelineConfig& c) {
                         return std::to_string(c.phantom.dims[0]) + "," + std::to_string(c.phantom.dims[1]) + "," +
                                std::to_string(c.phantom.dims[2]);
                     }});
        triple("phantom.spacing_mm", [](auto& c) -> auto& { return c.phantom.spacing_mm; });
        integer("phantom.frames", [](auto& c) -> auto& { return c.phantom.frames; });
        num("phantom.tag_period_mm", [](auto& c) -> auto& { return c.phantom.tag_period_mm; });
        num("phantom.tag_period_z_mm", [](auto& c) -> auto& { return c.phantom.tag_period_z_mm; });
        num("phantom.peak_half_periods", [](auto& c) -> auto& { return c.phantom.peak_half_periods; });
        integer("phantom.ramp_end_frame", [](auto& c) -> auto& { return c.phantom.ramp_end_frame; });
        num("phantom.shear_wavelength_mm", [](auto& c) -> auto& { return c.phantom.shear_wavelength_mm; });
        num("phantom.secondary_amplitude_mm",
            [](auto& c) -> auto& { return c.phantom.secondary_amplitude_mm; });
        num("phantom.secondary_wavelength_mm",
            [](auto& c) -> auto& { return c.phantom.secondary_wavelength_mm; });
        num("phantom.noise_sigma", [](auto& c) -> auto& { return c.phantom.noise_sigma; });
        t.push_back({"phantom.seed",
                     [](PipelineConfig& c, std::string_view v) { c.phantom.seed = to_u64("phantom.seed", v); },
                     [](const PipelineConfig& c) { return std::to_string(c.phantom.seed); }});

        num("harp.radius_fraction", [](auto& c) -> auto& { return c.harp.radius_fraction; });
        t.push_back({"harp.profile",
                     [](PipelineConfig& c, std::string_view v) {
                         if (v == "raised_cosine")
                             c.harp.profile = FilterProfile::raised_cosine;
                         else if (v == "hard_sphere")
                             c.harp.profile = FilterProfile::hard_sphere;
                         else
                             bad_value("harp.profile", v, "raised_cosine or hard_sphere");
                     },
                     [](const PipelineConfig& c) {
                         return std::string(c.harp.profile == FilterProfile::raised_cosine ? "raised_cosine"
                                                                                          : "hard_sphere");
                     }});
        num("harp.rolloff", [](auto& c) -> auto& { return c.harp.rolloff; });

        triple("pvira.sigma_fluid_mm", [](auto& c) -> auto& { return c.pvira.sigma_fluid_mm; });
        triple("pvira.sigma_diffusion_mm", [](auto& c) -> auto& { return c.pvira.sigma_diffusion_mm; });
        num("pvira.sigma_i", [](auto& c) -> auto& { return c.pvira.sigma_i; });
        integer("pvira.max_iters", [](auto& c) -> auto& { return c.pvira.max_iters; });
        num("pvira.step_max_voxels", [](auto& c) -> auto& { return c.pvira.step_max_voxels; });
        flag("pvira.incompressible", [](auto& c) -> auto& { return c.pvira.incompressible; });
        num("pvira.magnitude_threshold", [](auto& c) -> auto& { return c.pvira.magnitude_threshold; });
        num("pvira.stop_tol", [](auto& c) -> auto& { return c.pvira.stop_tol; });
        integer("pvira.taper_voxels", [](auto& c) -> auto& { return c.pvira.taper_voxels; });

        t.push_back({"strategy.methods",
                     [](PipelineConfig& c, std::string_view v) {
                         c.methods.clear();
                         for (std::string_view name : split(v, ','))
                             c.methods.push_back(parse_method(name));
                     },
                     [](const PipelineConfig& c) {
                         std::string s;
                         for (Method m : c.methods)
                             s += (s.empty() ? "" : ",") + std::string(to_string(m));
                         return s;
                     }});
        flag("strategy.project_init", [](auto& c) -> auto& { return c.project_init; });

        integer("eval.margin_voxels", [](auto& c) -> auto& { return c.eval.margin_voxels; });
        integer("eval.ssim_window", [](auto& c) -> auto& { return c.eval.ssim_window; });
        t.push_back({"eval.ssim_mode",
                     [](PipelineConfig& c, std::string_view v) {
                         if (v == "raw")
                             c.eval.ssim_mode = SsimMode::raw;
                         else if (v == "sincos")
                             c.eval.ssim_mode = SsimMode::sincos;
                         else
                             bad_value("eval.ssim_mode", v, "raw or sincos");
                     },
                     [](const PipelineConfig& c) {
                         return std::string(c.eval.ssim_mode == SsimMode::raw ? "raw" : "sincos");
                     }});
        t.push_back({"eval.slice_axis",
                     [](PipelineConfig& c, std::string_view v) { c.eval.slice_axis = to_axis("eval.slice_axis", v); },
                     [](const PipelineConfig& c) { return std::string(axis_name(c.eval.slice_axis)); }});
        t.push_back({"eval.directions",
                     [](PipelineConfig& c, std::string_view v) {
                         c.eval.directions.clear();
                         for (std::string_view a : split(v, ','))
                             c.eval.directions.push_back(to_axis("eval.directions", a));
                     },
                     [](const PipelineConfig& c) {
                         std::string s;
                         for (int d : c.eval.directions)
                             s += (s.empty() ? "" : ",") + std::string(axis_name(d));
                         return s;
                     }});
        flag("eval.mask_magnitude", [](auto& c) -> auto& { return c.eval.mask_magnitude; });
        num("eval.mask_fraction", [](auto& c) -> auto& { return c.eval.mask_fraction; });
        flag("eval.pgm", [](auto& c) -> auto& { return c.write_pgm; });
        flag("eval.svg", [](auto& c) -> auto& { return c.write_svg; });

        t.push_back({"output.dir",
                     [](PipelineConfig& c, std::string_view v) {
                         if (v.empty())
                             bad_value("output.dir", v, "a non-empty path");
                         c.output_dir = std::string(v);
                     },
                     [](const PipelineConfig& c) { return c.output_dir; }});
        return t;
    }();
    return table;
}

const Entry& find_entry(std::string_view key)
{
    for (const Entry& e : entries())
        if (e.key == key)
            return e;
    fail(ErrorKind::config, "unknown config key: " + std::string(key));
}

// Parses lines into `config`; keys must start with `prefix`.
void apply_text(PipelineConfig& config, std::string_view text, std::string_view prefix)
{
    std::set<std::string, std::less<>> seen;
    int line_no = 0;
    while (!text.empty()) {
        const auto eol = text.find('\n');
        std::string_view line = text.substr(0, eol);
        text.remove_prefix(eol == std::string_view::npos ? text.size() : eol + 1);
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos)
            line = line.substr(0, hash);
        line = trim(line);
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            fail(ErrorKind::config, "line " + std::to_string(line_no) + ": expected key = value");
        const std::string_view key = trim(line.substr(0, eq));
        const std::string_view value = trim(line.substr(eq + 1));
        if (key.substr(0, prefix.size()) != prefix)
            fail(ErrorKind::config, "line " + std::to_string(line_no) + ": unexpected key " + std::string(key));
        if (!seen.insert(std::string(key)).second)
            fail(ErrorKind::config, "line " + std::to_string(line_no) + ": repeated key " + std::string(key));
        find_entry(key).set(config, value);
    }
}

} // namespace

void PipelineConfig::validate() const
{
    try {
        phantom.validate();
        pvira.validate();
    } catch (const Error& e) {
        fail(ErrorKind::config, e.what());
    }
    for (int a = 0; a < 3; ++a)
        if (phantom.dims[static_cast<std::size_t>(a)] > 4096)
            fail(ErrorKind::config, "phantom.dims: at most 4096 per axis");
    if (!(harp.radius_fraction > 0.0 && harp.radius_fraction < 1.0))
        fail(ErrorKind::config, "harp.radius_fraction must lie in (0, 1)");
    if (!(harp.rolloff > 0.0 && harp.rolloff <= 1.0))
        fail(ErrorKind::config, "harp.rolloff must lie in (0, 1]");
    if (methods.empty())
        fail(ErrorKind::config, "strategy.methods must name at least one method");
    for (std::size_t i = 0; i < methods.size(); ++i)
        for (std::size_t j = i + 1; j < methods.size(); ++j)
            if (methods[i] == methods[j])
                fail(ErrorKind::config, "strategy.methods lists a method twice");
    if (eval.margin_voxels < 0)
        fail(ErrorKind::config, "eval.margin_voxels must be >= 0");
    for (int a = 0; a < 3; ++a)
        if (2 * eval.margin_voxels >= phantom.dims[static_cast<std::size_t>(a)])
            fail(ErrorKind::config, "eval.margin_voxels leaves no interior");
    if (eval.ssim_window < 1 || eval.ssim_window % 2 == 0)
        fail(ErrorKind::config, "eval.ssim_window must be odd and >= 1");
    for (int a = 0; a < 3; ++a)
        if (a != eval.slice_axis && eval.ssim_window > phantom.dims[static_cast<std::size_t>(a)])
            fail(ErrorKind::config, "eval.ssim_window is larger than a slice");
    if (eval.directions.empty())
        fail(ErrorKind::config, "eval.directions must name at least one axis");
    if (!(eval.mask_fraction >= 0.0))
        fail(ErrorKind::config, "eval.mask_fraction must be >= 0");
}

PipelineConfig parse_config(std::string_view text)
{
    PipelineConfig c;
    apply_text(c, text, "");
    c.validate();
    return c;
}

PipelineConfig load_config(const std::filesystem::path& path)
{
    std::ifstream f(path, std::ios::binary);
    if (!f)
        fail(ErrorKind::io, "cannot read config: " + path.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_config(ss.str());
}

void set_config_value(PipelineConfig& config, std::string_view key, std::string_view value)
{
    PipelineConfig next = config;
    find_entry(trim(key)).set(next, trim(value));
    next.validate();
    config = std::move(next);
}

std::string serialize_config(const PipelineConfig& config)
{
    std::string out;
    for (const Entry& e : entries())
        out += e.key + " = " + e.get(config) + "\n";
    return out;
}

std::string serialize_phantom(const PhantomParams& params)
{
    PipelineConfig c;
    c.phantom = params;
    std::string out;
    for (const Entry& e : entries())
        if (e.key.starts_with("phantom."))
            out += e.key + " = " + e.get(c) + "\n";
    return out;
}

PhantomParams parse_phantom(std::string_view text)
{
    PipelineConfig c;
    apply_text(c, text, "phantom.");
    try {
        c.phantom.validate();
    } catch (const Error& e) {
        fail(ErrorKind::config, e.what());
    }
    return c.phantom;
}

std::uint64_t fnv1a64(std::string_view bytes)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char b : bytes) {
        h ^= b;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string config_hash(const PipelineConfig& config)
{
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(serialize_config(config))));
    return buf;
}

std::vector<std::string> config_keys()
{
    std::vector<std::string> keys;
    for (const Entry& e : entries())
        keys.push_back(e.key);
    return keys;
}

} // namespace tagflow
