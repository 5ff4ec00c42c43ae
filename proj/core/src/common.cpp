#include "trj/common.hpp"

#include <cstdlib>
#include <iostream>

namespace trj {

void log_warning(const std::string& message) { std::cerr << "[trj] warning: " << message << '\n'; }

void log_info(const std::string& message) { std::cerr << "[trj] " << message << '\n'; }

void configure_threads_from_env() {
  const char* env = std::getenv("TRJ_THREADS");
  if (env == nullptr) return;
  char* end = nullptr;
  long n = std::strtol(env, &end, 10);
  if (end == env || n < 1) {
    log_warning(std::string("ignoring invalid TRJ_THREADS=") + env);
    return;
  }
  Eigen::setNbThreads(static_cast<int>(n));
}

}  // namespace trj
