#pragma once

#include <functional>
#include <string>

namespace lsf {

// Process-wide warning sink. Defaults to stderr; tests swap it to capture.
using WarningSink = std::function<void(const std::string&)>;

void set_warning_sink(WarningSink sink);
void warn(const std::string& message);

}  // namespace lsf
