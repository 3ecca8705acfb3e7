#include "surad/log.hpp"

#include <cstdio>
#include <mutex>
#include <utility>

namespace surad {

namespace {
std::mutex g_mutex;
WarnHandler g_handler;
}  // namespace

void warn(const std::string& message) {
  std::lock_guard<std::mutex> lock(g_mutex);
  if (g_handler) {
    g_handler(message);
  } else {
    std::fprintf(stderr, "[surad] warning: %s\n", message.c_str());
  }
}

void set_warn_handler(WarnHandler handler) {
  std::lock_guard<std::mutex> lock(g_mutex);
  g_handler = std::move(handler);
}

}  // namespace surad
