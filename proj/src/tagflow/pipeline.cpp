#include "tagflow/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <fftw3.h>

#include <spdlog/spdlog.h>

#include "tagflow/error.hpp"
#include "tagflow/harp.hpp"
#include "tagflow/parallel.hpp"
#include "tagflow/report.hpp"
#include "tagflow/strategies.hpp"
#include "tagflow/volume_io.hpp"
#include "tagflow/volume_ops.hpp"

namespace tagflow {

namespace fs = std::filesystem;

std::filesystem::path output_root(const PipelineConfig& config, const RunOptions& options)
{
    return options.out_dir.empty() ? fs::path(config.output_dir) : options.out_dir;
}

std::string frame_file(const char* pattern, int n)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, pattern, n);
    return buf;
}

namespace {

void make_dirs(const fs::path& dir)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec)
        fail(ErrorKind::io, "cannot create " + dir.string() + ": " + ec.message());
}

std::string fmt(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// The phantom parameters the frames were rendered with.
PhantomParams load_model(const fs::path& root)
{
    return parse_phantom(read_text_file(root / "phantom" / "model.cfg"));
}

std::array<HarpFilterSpec, 3> filter_specs(const PipelineConfig& config, const PhantomParams& phantom)
{
    try {
        return default_filter_specs(make_tag_pattern(phantom), config.harp.radius_fraction, config.harp.profile,
                                    config.harp.rolloff);
    } catch (const Error& e) {
        fail(ErrorKind::config, e.what());
    }
}

int count_frames(const fs::path& dir, const char* pattern)
{
    int n = 0;
    while (fs::exists(dir / frame_file(pattern, n + 1)))
        ++n;
    return n;
}

std::vector<PhaseSet> load_phases(const PipelineConfig& config, const fs::path& root)
{
    const PhantomParams model = load_model(root);
    const auto specs = filter_specs(config, model);
    const fs::path dir = root / "harp";
    const int frames = count_frames(dir, "frame_%02d_phase0.tmv");
    if (frames < 2)
        fail(ErrorKind::io, "need at least 2 harp frames in " + dir.string());
    std::vector<PhaseSet> phases(static_cast<std::size_t>(frames));
    for (int n = 1; n <= frames; ++n) {
        PhaseSet& p = phases[static_cast<std::size_t>(n - 1)];
        p.specs = specs;
        for (int d = 0; d < 3; ++d) {
            char name[64];
            std::snprintf(name, sizeof name, "frame_%02d_phase%d.tmv", n, d);
            ScalarVolume phase = read_scalar_volume(dir / name);
            // Single-precision storage can round -pi + tiny up to -pi or
            // pi - tiny up to pi; rewrap into [-pi, pi).
            for (double& v : phase.values())
                v = wrap(v);
            std::snprintf(name, sizeof name, "frame_%02d_mag%d.tmv", n, d);
            p.phases[static_cast<std::size_t>(d)] = std::move(phase);
            p.magnitudes[static_cast<std::size_t>(d)] = read_scalar_volume(dir / name);
        }
        p.validate();
    }
    return phases;
}

void remove_all_quiet(const fs::path& p)
{
    std::error_code ec;
    fs::remove_all(p, ec);
}

std::string join_numbers(const std::vector<double>& v)
{
    std::string s;
    for (double x : v)
        s += (s.empty() ? "" : ",") + fmt(x);
    return s;
}

std::string join_ints(const std::vector<int>& v)
{
    std::string s;
    for (int x : v)
        s += (s.empty() ? "" : ",") + std::to_string(x);
    return s;
}

std::string pvira_section(const PipelineConfig& config)
{
    std::string out;
    const std::string all = serialize_config(config);
    std::size_t pos = 0;
    while (pos < all.size()) {
        const std::size_t eol = all.find('\n', pos);
        const std::string line = all.substr(pos, eol - pos);
        if (line.starts_with("pvira.") || line.starts_with("strategy.project_init"))
            out += line + "\n";
        pos = eol + 1;
    }
    return out;
}

void persist_estimate(const SequenceEstimate& e, const PipelineConfig& config, const fs::path& root, bool trace)
{
    const std::string name(to_string(e.method));
    const fs::path final_dir = root / "register" / name;
    const fs::path tmp_dir = root / "register" / (name + ".tmp");
    remove_all_quiet(tmp_dir);
    make_dirs(tmp_dir);
    try {
        for (std::size_t i = 0; i < e.deformations.size(); ++i)
            write_volume(tmp_dir / frame_file("psi_%02d.tmv", static_cast<int>(i) + 2), e.deformations[i]);
        // Incremental velocities belong to pairs (i -> i+1), the others to frames.
        const int first = e.method == Method::incremental ? 1 : 2;
        for (std::size_t i = 0; i < e.velocities.size(); ++i)
            write_volume(tmp_dir / frame_file("v_%02d.tmv", static_cast<int>(i) + first), e.velocities[i]);
        for (std::size_t i = 0; i < e.initial_velocities.size(); ++i)
            write_volume(tmp_dir / frame_file("init_%02d.tmv", static_cast<int>(i) + 2), e.initial_velocities[i]);
        if (trace)
            for (std::size_t i = 0; i < e.traces.size(); ++i) {
                const char* pattern = e.method == Method::incremental ? "trace_pair_%02d.csv" : "trace_%02d.csv";
                write_trace_csv(tmp_dir / frame_file(pattern, static_cast<int>(i) + first), e.traces[i]);
            }
        std::string manifest = "method = " + name + "\n";
        manifest += "frames = " + std::to_string(e.frames()) + "\n";
        manifest += pvira_section(config);
        manifest += "iterations = " + join_ints(e.iterations) + "\n";
        manifest += "inverse_consistency_mm = " + join_numbers(e.inverse_consistency_mm) + "\n";
        manifest += "seconds = " + join_numbers(e.seconds) + "\n";
        write_text_file(tmp_dir / "manifest.cfg", manifest);

        remove_all_quiet(final_dir);
        std::error_code ec;
        fs::rename(tmp_dir, final_dir, ec);
        if (ec)
            fail(ErrorKind::io, "cannot move " + tmp_dir.string() + " into place: " + ec.message());
    } catch (...) {
        remove_all_quiet(tmp_dir);
        throw;
    }
}

SequenceEstimate load_estimate(Method method, const fs::path& root, int frames)
{
    const fs::path dir = root / "register" / std::string(to_string(method));
    if (!fs::exists(dir / "manifest.cfg"))
        fail(ErrorKind::io, "no registration results for " + std::string(to_string(method)) + " in " + dir.string());
    SequenceEstimate e;
    e.method = method;
    for (int n = 2; n <= frames; ++n)
        e.deformations.push_back(read_vector_volume(dir / frame_file("psi_%02d.tmv", n), FieldKind::displacement));
    return e;
}

template <class Fn>
void stage(const char* name, Fn&& fn)
{
    const auto t0 = std::chrono::steady_clock::now();
    spdlog::info("stage {}: start", name);
    try {
        fn();
    } catch (const Error& e) {
        fail(e.kind(), std::string("stage ") + name + ": " + e.what());
    } catch (const fs::filesystem_error& e) {
        fail(ErrorKind::io, std::string("stage ") + name + ": " + e.what());
    } catch (const std::exception& e) {
        fail(ErrorKind::internal, std::string("stage ") + name + ": " + e.what());
    }
    spdlog::info("stage {}: done in {:.1f} s", name,
                 std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
}

} // namespace

void cmd_phantom(const PipelineConfig& config, const RunOptions& options)
{
    config.validate();
    const fs::path dir = output_root(config, options) / "phantom";
    make_dirs(dir);
    const PhantomParams& p = config.phantom;
    const MotionModel model = make_motion_model(p);
    const TagPattern pattern = make_tag_pattern(p);
    const Grid3 grid = p.grid();
    parallel_for(static_cast<std::size_t>(p.frames), options.jobs, [&](std::size_t i) {
        const int n = static_cast<int>(i) + 1;
        write_volume(dir / frame_file("frame_%02d.tmv", n),
                     render_tagged_frame(model, pattern, grid, n, p.noise_sigma, p.seed));
    });
    write_text_file(dir / "model.cfg", serialize_phantom(p));
}

void cmd_harp(const PipelineConfig& config, const RunOptions& options)
{
    config.validate();
    const fs::path root = output_root(config, options);
    const PhantomParams model = load_model(root);
    const auto specs = filter_specs(config, model);
    const int frames = count_frames(root / "phantom", "frame_%02d.tmv");
    if (frames < 1)
        fail(ErrorKind::io, "no phantom frames in " + (root / "phantom").string());
    const fs::path dir = root / "harp";
    make_dirs(dir);
    parallel_for(static_cast<std::size_t>(frames), options.jobs, [&](std::size_t i) {
        const int n = static_cast<int>(i) + 1;
        const ScalarVolume image = read_scalar_volume(root / "phantom" / frame_file("frame_%02d.tmv", n));
        const PhaseSet p = extract_phase_set(image, specs);
        for (int d = 0; d < 3; ++d) {
            char name[64];
            std::snprintf(name, sizeof name, "frame_%02d_phase%d.tmv", n, d);
            write_volume(dir / name, p.phases[static_cast<std::size_t>(d)]);
            std::snprintf(name, sizeof name, "frame_%02d_mag%d.tmv", n, d);
            write_volume(dir / name, p.magnitudes[static_cast<std::size_t>(d)]);
        }
    });
}

int cmd_register(const PipelineConfig& config, const RunOptions& options)
{
    config.validate();
    const fs::path root = output_root(config, options);
    const std::vector<PhaseSet> phases = load_phases(config, root);
    make_dirs(root / "register");
    SequenceRegistrar registrar(phases, config.pvira, {.project_init = config.project_init, .jobs = options.jobs});
    for (Method m : config.methods) {
        const SequenceEstimate e = registrar.run(m);
        persist_estimate(e, config, root, options.trace);
    }
    std::string summary;
    summary += "frames = " + std::to_string(phases.size()) + "\n";
    summary += "register_calls = " + std::to_string(registrar.register_calls()) + "\n";
    write_text_file(root / "register" / "summary.cfg", summary);
    return registrar.register_calls();
}

void cmd_evaluate(const PipelineConfig& config, const RunOptions& options)
{
    config.validate();
    const fs::path root = output_root(config, options);
    const std::vector<PhaseSet> phases = load_phases(config, root);
    const int frames = static_cast<int>(phases.size());
    std::vector<SequenceEstimate> estimates;
    for (Method m : config.methods)
        estimates.push_back(load_estimate(m, root, frames));

    const PhantomParams model_params = load_model(root);
    std::optional<GroundTruth> truth;
    if (model_params.frames == frames && model_params.grid() == phases[0].grid())
        truth = GroundTruth{make_motion_model(model_params), make_tag_pattern(model_params)};
    else
        spdlog::warn("phantom model does not match the phases; skipping endpoint metrics");

    EvalOptions eval = config.eval;
    eval.jobs = options.jobs;
    const EvaluationResult result = evaluate_sequence(estimates, phases, truth ? &*truth : nullptr, eval);

    const fs::path dir = root / "evaluate";
    make_dirs(dir);
    write_metrics_csv(dir / "metrics.csv", result.rows);
    write_metrics_csv(dir / "worst_slices.csv", result.worst_slices);
    if (config.write_svg) {
        std::optional<int> onset;
        if (truth)
            onset = jump_onset_frame(truth->model, truth->pattern);
        write_text_file(dir / "metrics.svg", render_svg_chart(result.rows, onset));
    }
    if (config.write_pgm) {
        const fs::path slices = dir / "slices";
        make_dirs(slices);
        const int axis = config.eval.slice_axis;
        const int mid = phases[0].grid().dim(axis) / 2;
        const std::size_t channel = static_cast<std::size_t>(config.eval.directions.front());
        for (int n = 2; n <= frames; ++n) {
            const auto& ref = phases[static_cast<std::size_t>(n - 1)].phases[channel];
            write_pgm(slices / frame_file("reference_%02d.pgm", n), extract_slice(ref, axis, mid), -kPi, kPi);
            for (const SequenceEstimate& e : estimates) {
                const ScalarVolume warped =
                    warp_phase(phases[0].phases[channel], e.deformations[static_cast<std::size_t>(n - 2)]);
                write_pgm(slices / (std::string(to_string(e.method)) + frame_file("_%02d.pgm", n)),
                          extract_slice(warped, axis, mid), -kPi, kPi);
            }
        }
    }
}

void cmd_pipeline(const PipelineConfig& config, const RunOptions& options)
{
    config.validate();
    const fs::path root = output_root(config, options);
    stage("setup", [&] {
        make_dirs(root);
        write_text_file(root / "config.cfg", serialize_config(config));
    });
    stage("phantom", [&] { cmd_phantom(config, options); });
    stage("harp", [&] { cmd_harp(config, options); });
    int calls = 0;
    stage("register", [&] { calls = cmd_register(config, options); });
    stage("evaluate", [&] { cmd_evaluate(config, options); });
    stage("manifest", [&] {
        std::string m;
        m += "tagflow_version = " TAGFLOW_VERSION "\n";
        m += std::string("fftw_version = ") + fftw_version + "\n";
        m += "config_hash = " + config_hash(config) + "\n";
        m += "register_calls = " + std::to_string(calls) + "\n";
        write_text_file(root / "run_manifest.cfg", m);
    });
}

} // namespace tagflow
