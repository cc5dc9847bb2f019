#include "flowsift/common.hpp"

#include <chrono>
#include <cstdio>

namespace flowsift {

// Structured log records on stderr: ts=... stage=... level=... msg=...
// Artifacts never include timestamps so outputs stay reproducible.
void log_line(const std::string& stage, const std::string& level,
              const std::string& msg) {
    auto now = std::chrono::system_clock::now();
    auto us = std::chrono::duration_cast<std::chrono::microseconds>(
                  now.time_since_epoch())
                  .count();
    std::fprintf(stderr, "ts=%lld.%06lld stage=%s level=%s msg=\"%s\"\n",
                 static_cast<long long>(us / 1000000),
                 static_cast<long long>(us % 1000000), stage.c_str(),
                 level.c_str(), msg.c_str());
}

}  // namespace flowsift
