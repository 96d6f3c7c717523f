#include "structgen/manifest.hpp"

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>

#include "structgen/errors.hpp"

namespace structgen {

RunManifest RunManifest::begin(const std::string& command) {
  RunManifest m;
  m.command = command;
  m.started_at = utc_timestamp();
  return m;
}

nlohmann::json RunManifest::to_json() const {
  nlohmann::json j{{"command", command},
                   {"tool_version", tool_version},
                   {"config", config},
                   {"inputs", inputs},
                   {"outputs", outputs},
                   {"started_at", started_at},
                   {"finished_at", finished_at}};
  j["seed"] = seed ? nlohmann::json(*seed) : nlohmann::json(nullptr);
  return j;
}

std::string RunManifest::write(const std::string& dir) const {
  std::filesystem::create_directories(dir.empty() ? "." : dir);
  const std::string path = (std::filesystem::path(dir.empty() ? "." : dir) / ("manifest." + command + ".json")).string();
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError(path, "cannot write manifest");
  out << to_json().dump(2) << '\n';
  if (!out) throw IoError(path, "manifest write failed");
  return path;
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace structgen
