#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>

#include "json.hpp"

namespace structgen {

inline constexpr const char* kToolVersion = "0.1.0";

// Provenance record written next to every artifact a command produces.
// Timestamps make it differ between reruns; artifacts themselves do not.
struct RunManifest {
  std::string command;
  nlohmann::json config = nlohmann::json::object();
  std::map<std::string, std::string> inputs;
  std::map<std::string, std::string> outputs;
  std::optional<std::uint64_t> seed;
  std::string tool_version = kToolVersion;
  std::string started_at;
  std::string finished_at;

  // Fresh manifest stamped with the current time.
  static RunManifest begin(const std::string& command);

  nlohmann::json to_json() const;
  // Writes <dir>/manifest.<command>.json and returns its path.
  std::string write(const std::string& dir) const;
};

// Current UTC time as 2024-01-31T12:00:00Z.
std::string utc_timestamp();

}  // namespace structgen
