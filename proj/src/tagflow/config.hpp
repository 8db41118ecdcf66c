#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "tagflow/eval.hpp"
#include "tagflow/harp.hpp"
#include "tagflow/phantom.hpp"
#include "tagflow/pvira.hpp"
#include "tagflow/strategies.hpp"

namespace tagflow {

struct HarpOptions {
    double radius_fraction = 0.6;   // filter radius as a fraction of |k|
    FilterProfile profile = FilterProfile::raised_cosine;
    double rolloff = 0.25;
};

struct PipelineConfig {
    PhantomParams phantom;
    HarpOptions harp;
    PviraParams pvira;
    std::vector<Method> methods{Method::direct, Method::incremental, Method::new_start};
    bool project_init = false;
    EvalOptions eval;          // eval.jobs is a runtime setting, not part of the file
    bool write_pgm = false;
    bool write_svg = true;
    std::string output_dir = "tagflow_out";

    // Range checks across all sections; throws ErrorKind::config.
    void validate() const;
};

// Flat `key = value` lines with dotted keys; `#` starts a comment. Unknown
// or repeated keys and out-of-range values are rejected. Keys not given keep
// their defaults.
PipelineConfig parse_config(std::string_view text);
PipelineConfig load_config(const std::filesystem::path& path);

// Sets one key as if it appeared in a config file, then revalidates.
void set_config_value(PipelineConfig& config, std::string_view key, std::string_view value);

// Every key, in a fixed order, with round-trip exact numbers.
std::string serialize_config(const PipelineConfig& config);
// The phantom.* subset, as written to model.cfg.
std::string serialize_phantom(const PhantomParams& params);
PhantomParams parse_phantom(std::string_view text);

// 64-bit FNV-1a of serialize_config, as 16 hex digits.
std::string config_hash(const PipelineConfig& config);
std::uint64_t fnv1a64(std::string_view bytes);

std::vector<std::string> config_keys();

} // namespace tagflow
