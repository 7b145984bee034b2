#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace stf::cli {

using json = nlohmann::json;

enum ExitCode { kOk = 0, kConfigError = 2, kNumericalError = 3 };

/// Built-in configuration; every key a config file may set appears here.
json default_config();

/// Defaults ← file ← `key.path=value` overrides. Unknown keys are errors.
json resolve_config(const std::string& config_path, const std::vector<std::string>& overrides);

/// 64-bit FNV-1a of the compact JSON dump, as 16 hex digits.
std::string config_hash(const json& config);

/// Entry point shared by the executable and the tests.
int run(int argc, const char* const* argv);

}  // namespace stf::cli
