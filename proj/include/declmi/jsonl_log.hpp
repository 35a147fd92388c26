#pragma once

#include <functional>
#include <string>

#include <json.hpp>

namespace declmi::log {

using Sink = std::function<void(const std::string& line)>;

// Structured event channel. Default sink writes one JSON object per line
// to stderr; tests and the CLI redirect it.
void set_sink(Sink sink);
void reset_sink();
void emit(const nlohmann::json& event);

}  // namespace declmi::log
