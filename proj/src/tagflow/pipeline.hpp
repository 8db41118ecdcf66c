#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "tagflow/config.hpp"

namespace tagflow {

struct RunOptions {
    std::filesystem::path out_dir;   // empty: config.output_dir
    int jobs = 1;
    bool trace = false;              // write per-registration trace CSVs
};

// Each stage reads the previous stage's files under the output directory:
//   phantom/frame_NN.tmv, phantom/model.cfg
//   harp/frame_NN_phaseD.tmv, harp/frame_NN_magD.tmv
//   register/<method>/{psi_NN,v_NN[,init_NN]}.tmv + manifest.cfg, register/summary.cfg
//   evaluate/metrics.csv, evaluate/worst_slices.csv, evaluate/metrics.svg, evaluate/slices/*.pgm
void cmd_phantom(const PipelineConfig& config, const RunOptions& options);
void cmd_harp(const PipelineConfig& config, const RunOptions& options);
// Returns the number of pair registrations performed.
int cmd_register(const PipelineConfig& config, const RunOptions& options);
void cmd_evaluate(const PipelineConfig& config, const RunOptions& options);
// All four stages, then run_manifest.cfg. A failing stage is named in the
// error message.
void cmd_pipeline(const PipelineConfig& config, const RunOptions& options);

std::filesystem::path output_root(const PipelineConfig& config, const RunOptions& options);
std::string frame_file(const char* pattern, int n);

} // namespace tagflow
