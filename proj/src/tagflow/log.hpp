#pragma once

#include <spdlog/spdlog.h>

namespace tagflow {

// Reads TAGFLOW_LOG (error|info|debug) once and configures the default
// logger. Unknown values fall back to "info".
void init_logging();

} // namespace tagflow
