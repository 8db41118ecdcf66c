#pragma once

#include <atomic>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tagflow/harp.hpp"
#include "tagflow/pvira.hpp"

namespace tagflow {

enum class Method { direct, incremental, new_start };

std::string_view to_string(Method m);
Method parse_method(std::string_view name);   // throws ErrorKind::config

// Frame-1 to frame-n estimates for n = 2..N; element n-2 belongs to frame n.
struct SequenceEstimate {
    Method method = Method::direct;
    std::vector<VectorVolume> deformations;
    // direct, new_start: the velocity behind each deformation.
    // incremental: the pair velocities V_1..V_{N-1}.
    std::vector<VectorVolume> velocities;
    std::vector<VectorVolume> initial_velocities;   // new_start only: the summed warm starts
    PviraParams params;
    std::vector<double> seconds;                     // wall clock per frame
    std::vector<double> inverse_consistency_mm;      // per registration this method ran
    std::vector<int> iterations;                     // per registration this method ran
    std::vector<std::vector<TraceRecord>> traces;    // per registration this method ran

    int frames() const { return static_cast<int>(deformations.size()) + 1; }
};

struct StrategyOptions {
    bool project_init = false;   // project the summed velocity before using it
    int jobs = 1;
};

// Fixed-order sum V_1 + V_2 + ... (left fold, ascending index).
VectorVolume accumulate_velocities(std::span<const VectorVolume> velocities);

// Runs the strategies over one sequence. Pair registrations (i -> i+1) are
// computed once and shared between incremental and new_start.
class SequenceRegistrar {
public:
    SequenceRegistrar(std::span<const PhaseSet> phases, PviraParams params, StrategyOptions options = {});

    SequenceEstimate run(Method method);
    SequenceEstimate run_direct();
    SequenceEstimate run_incremental();
    SequenceEstimate run_new_start();

    int register_calls() const { return calls_.load(); }
    int frames() const { return static_cast<int>(phases_.size()); }

private:
    struct Pair {
        RegistrationResult result;
        double seconds = 0.0;
        double inverse_consistency = 0.0;
    };

    RegistrationResult call(const PhaseSet& moving, const PhaseSet& fixed,
                            const std::optional<VectorVolume>& init);
    void ensure_pairs();

    std::span<const PhaseSet> phases_;
    PviraParams params_;
    StrategyOptions options_;
    std::vector<Pair> pairs_;
    std::atomic<int> calls_{0};
};

SequenceEstimate run_direct(std::span<const PhaseSet> phases, const PviraParams& params, int jobs = 1);
SequenceEstimate run_incremental(std::span<const PhaseSet> phases, const PviraParams& params, int jobs = 1);
SequenceEstimate run_new_start(std::span<const PhaseSet> phases, const PviraParams& params,
                               StrategyOptions options = {});

} // namespace tagflow
