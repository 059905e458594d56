#pragma once

#include <spdlog/logger.h>

#include <memory>

namespace smallgain {

// Shared library logger ("smallgain"). Level comes from SMALLGAIN_LOG
// (trace|debug|info|warn|error|off), default warn. Writes to stderr.
std::shared_ptr<spdlog::logger> logger();

}  // namespace smallgain
