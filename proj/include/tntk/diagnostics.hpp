#pragma once

#include <functional>
#include <string>

namespace tntk {

// Non-fatal conditions (dropped features, duplicate samples, skipped specs)
// are reported here. The default handler prints "warning: <msg>" to stderr.
using WarningHandler = std::function<void(const std::string&)>;

// Returns the previous handler. An empty handler restores the default.
WarningHandler set_warning_handler(WarningHandler handler);
void warn(const std::string& message);

}  // namespace tntk
