#include "smallgain/log.hpp"

#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>

namespace smallgain {

std::shared_ptr<spdlog::logger> logger() {
    static std::shared_ptr<spdlog::logger> instance = [] {
        auto log = std::make_shared<spdlog::logger>(
            "smallgain", std::make_shared<spdlog::sinks::stderr_sink_mt>());
        log->set_pattern("[%l] %v");
        const char* env = std::getenv("SMALLGAIN_LOG");
        log->set_level(env ? spdlog::level::from_str(env) : spdlog::level::warn);
        return log;
    }();
    return instance;
}

}  // namespace smallgain
