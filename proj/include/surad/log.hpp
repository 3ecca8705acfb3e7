#pragma once

#include <functional>
#include <string>

namespace surad {

using WarnHandler = std::function<void(const std::string&)>;

// Non-fatal diagnostics (e.g. shininess clamped to the degree bound).
// Default handler writes to stderr.
void warn(const std::string& message);
void set_warn_handler(WarnHandler handler);

}  // namespace surad
