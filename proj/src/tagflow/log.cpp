#include "tagflow/log.hpp"

#include <cstdlib>
#include <mutex>
#include <string>

#include <spdlog/sinks/stdout_color_sinks.h>

namespace tagflow {

void init_logging()
{
    static std::once_flag once;
    std::call_once(once, [] {
        auto logger = spdlog::stderr_color_mt("tagflow");
        logger->set_pattern("[%l] %v");
        spdlog::set_default_logger(logger);
        const char* env = std::getenv("TAGFLOW_LOG");
        const std::string level = env ? env : "info";
        if (level == "error")
            spdlog::set_level(spdlog::level::err);
        else if (level == "debug")
            spdlog::set_level(spdlog::level::debug);
        else
            spdlog::set_level(spdlog::level::info);
    });
}

} // namespace tagflow
