#pragma once

#include <string>
#include <utility>
#include <vector>

#include "ccm/common.hpp"

namespace ccm {

inline constexpr const char* kToolVersion = "0.1.0";

/// Record of one CLI invocation. Re-running a manifest reproduces the
/// data-bearing outputs byte for byte; the manifest itself carries the
/// timestamp of its run.
struct RunManifest {
  std::string tool = "ccm";
  std::string version = kToolVersion;
  std::string command;
  std::string timestamp;
  std::vector<std::pair<std::string, std::string>> config;   // key, value (stringified)
  std::vector<std::pair<std::string, std::string>> outputs;  // name, path
  std::vector<std::pair<std::string, std::string>> logs;     // name, path (timing etc.)

  const std::string* find(const std::string& key) const;
};

std::string manifest_to_json(const RunManifest& m);
RunManifest manifest_from_json(const std::string& text);
void save_manifest(const RunManifest& m, const std::string& path);
RunManifest load_manifest(const std::string& path);

}  // namespace ccm
