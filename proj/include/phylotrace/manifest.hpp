// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "phylotrace/detail/text.hpp"
#include "phylotrace/error.hpp"
#include "phylotrace/rng.hpp"
#include "phylotrace/version.hpp"

namespace phylotrace {

/// Provenance sidecar emitted next to every CLI output: re-running the same
/// subcommand with the same resolved options and inputs reproduces the
/// outputs bit-identically (the timestamp is informational only).
struct RunManifest {
  std::string subcommand;
  nlohmann::json options = nlohmann::json::object();
  std::map<std::string, std::string> input_digests;
  std::optional<std::uint64_t> seed;
  std::string version = kVersion;
  std::string timestamp;
};

inline std::string file_digest(const std::filesystem::path& path) {
  const std::string bytes = detail::read_text_file(path, "manifest");
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(bytes)));
  return std::string("fnv1a64:") + buf;
}

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline void write_manifest(const RunManifest& manifest, const std::filesystem::path& path) {
  nlohmann::json j;
  j["subcommand"] = manifest.subcommand;
  j["options"] = manifest.options;
  j["inputs"] = manifest.input_digests;
  if (manifest.seed)
    j["seed"] = *manifest.seed;
  else
    j["seed"] = nullptr;
  j["version"] = manifest.version;
  j["timestamp"] = manifest.timestamp.empty() ? utc_timestamp() : manifest.timestamp;
  detail::write_text_file(path, j.dump(2) + "\n", "manifest");
}

}  // namespace phylotrace
