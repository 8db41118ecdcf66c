#include "tagflow/strategies.hpp"

#include <chrono>

#include <spdlog/spdlog.h>

#include "tagflow/error.hpp"
#include "tagflow/parallel.hpp"
#include "tagflow/volume_ops.hpp"

namespace tagflow {

std::string_view to_string(Method m)
{
    switch (m) {
    case Method::direct:
        return "direct";
    case Method::incremental:
        return "incremental";
    case Method::new_start:
        return "new_start";
    }
    return "unknown";
}

Method parse_method(std::string_view name)
{
    for (Method m : {Method::direct, Method::incremental, Method::new_start})
        if (to_string(m) == name)
            return m;
    fail(ErrorKind::config, "unknown method: " + std::string(name));
}

VectorVolume accumulate_velocities(std::span<const VectorVolume> velocities)
{
    if (velocities.empty())
        fail(ErrorKind::invalid_argument, "accumulate_velocities: empty list");
    VectorVolume sum(velocities[0].grid(), FieldKind::velocity);
    for (const VectorVolume& v : velocities) {
        require_same_grid(sum.grid(), v.grid());
        require_kind(v, FieldKind::velocity, "accumulate_velocities");
        for (std::size_t m = 0; m < sum.size(); ++m)
            sum[m] += v[m];
    }
    return sum;
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0)
{
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

SequenceEstimate empty_estimate(Method m, const PviraParams& params, int frames)
{
    SequenceEstimate e;
    e.method = m;
    e.params = params;
    const auto count = static_cast<std::size_t>(frames - 1);
    e.deformations.resize(count);
    e.seconds.assign(count, 0.0);
    e.inverse_consistency_mm.assign(count, 0.0);
    e.iterations.assign(count, 0);
    e.traces.resize(count);
    return e;
}

} // namespace

SequenceRegistrar::SequenceRegistrar(std::span<const PhaseSet> phases, PviraParams params, StrategyOptions options)
    : phases_(phases), params_(params), options_(options)
{
    if (phases_.size() < 2)
        fail(ErrorKind::invalid_argument, "a sequence needs at least 2 frames");
    params_.validate();
    for (const PhaseSet& p : phases_) {
        p.validate();
        require_same_grid(phases_[0].grid(), p.grid());
    }
}

RegistrationResult SequenceRegistrar::call(const PhaseSet& moving, const PhaseSet& fixed,
                                           const std::optional<VectorVolume>& init)
{
    ++calls_;
    return register_pair(moving, fixed, params_, init);
}

void SequenceRegistrar::ensure_pairs()
{
    if (!pairs_.empty())
        return;
    std::vector<Pair> pairs(phases_.size() - 1);
    parallel_for(pairs.size(), options_.jobs, [&](std::size_t i) {
        const auto t0 = Clock::now();
        pairs[i].result = call(phases_[i], phases_[i + 1], std::nullopt);
        pairs[i].seconds = seconds_since(t0);
        pairs[i].inverse_consistency = inverse_consistency_error(pairs[i].result.forward, pairs[i].result.inverse);
        spdlog::info("pair {}->{}: {} iterations, {:.1f} s", i + 1, i + 2, pairs[i].result.trace.size(),
                     pairs[i].seconds);
    });
    pairs_ = std::move(pairs);
}

SequenceEstimate SequenceRegistrar::run(Method method)
{
    switch (method) {
    case Method::direct:
        return run_direct();
    case Method::incremental:
        return run_incremental();
    case Method::new_start:
        return run_new_start();
    }
    fail(ErrorKind::invalid_argument, "unknown method");
}

SequenceEstimate SequenceRegistrar::run_direct()
{
    SequenceEstimate e = empty_estimate(Method::direct, params_, frames());
    e.velocities.resize(e.deformations.size());
    parallel_for(e.deformations.size(), options_.jobs, [&](std::size_t i) {
        const auto t0 = Clock::now();
        RegistrationResult r = call(phases_[0], phases_[i + 1], std::nullopt);
        e.seconds[i] = seconds_since(t0);
        e.inverse_consistency_mm[i] = inverse_consistency_error(r.forward, r.inverse);
        e.iterations[i] = static_cast<int>(r.trace.size());
        e.traces[i] = std::move(r.trace);
        e.deformations[i] = std::move(r.forward);
        e.velocities[i] = std::move(r.velocity);
        spdlog::info("direct frame {}: {} iterations, {:.1f} s", i + 2, e.iterations[i], e.seconds[i]);
    });
    return e;
}

SequenceEstimate SequenceRegistrar::run_incremental()
{
    ensure_pairs();
    SequenceEstimate e = empty_estimate(Method::incremental, params_, frames());
    for (std::size_t i = 0; i < pairs_.size(); ++i) {
        const auto t0 = Clock::now();
        const VectorVolume& phi = pairs_[i].result.forward;
        // psi_{n} = psi_{n-1} o phi_{n-1}: step back one frame, then follow
        // the accumulated path to frame 1.
        e.deformations[i] = i == 0 ? phi : compose_displacements(e.deformations[i - 1], phi);
        e.seconds[i] = pairs_[i].seconds + seconds_since(t0);
        e.inverse_consistency_mm[i] = pairs_[i].inverse_consistency;
        e.iterations[i] = static_cast<int>(pairs_[i].result.trace.size());
        e.traces[i] = pairs_[i].result.trace;
        e.velocities.push_back(pairs_[i].result.velocity);
    }
    return e;
}

SequenceEstimate SequenceRegistrar::run_new_start()
{
    ensure_pairs();
    SequenceEstimate e = empty_estimate(Method::new_start, params_, frames());
    std::vector<VectorVolume> pair_velocities;
    pair_velocities.reserve(pairs_.size());
    for (const Pair& p : pairs_)
        pair_velocities.push_back(p.result.velocity);

    e.velocities.resize(e.deformations.size());
    e.initial_velocities.resize(e.deformations.size());
    parallel_for(e.deformations.size(), options_.jobs, [&](std::size_t i) {
        const auto t0 = Clock::now();
        VectorVolume init = accumulate_velocities(std::span(pair_velocities).first(i + 1));
        if (options_.project_init)
            init = project_divergence_free(init, params_.taper_voxels);
        RegistrationResult r = call(phases_[0], phases_[i + 1], init);
        e.seconds[i] = seconds_since(t0);
        e.inverse_consistency_mm[i] = inverse_consistency_error(r.forward, r.inverse);
        e.iterations[i] = static_cast<int>(r.trace.size());
        e.traces[i] = std::move(r.trace);
        e.deformations[i] = std::move(r.forward);
        e.velocities[i] = std::move(r.velocity);
        e.initial_velocities[i] = std::move(init);
        spdlog::info("new_start frame {}: {} iterations, {:.1f} s", i + 2, e.iterations[i], e.seconds[i]);
    });
    return e;
}

SequenceEstimate run_direct(std::span<const PhaseSet> phases, const PviraParams& params, int jobs)
{
    return SequenceRegistrar(phases, params, {.project_init = false, .jobs = jobs}).run_direct();
}

SequenceEstimate run_incremental(std::span<const PhaseSet> phases, const PviraParams& params, int jobs)
{
    return SequenceRegistrar(phases, params, {.project_init = false, .jobs = jobs}).run_incremental();
}

SequenceEstimate run_new_start(std::span<const PhaseSet> phases, const PviraParams& params, StrategyOptions options)
{
    return SequenceRegistrar(phases, params, options).run_new_start();
}

} // namespace tagflow
