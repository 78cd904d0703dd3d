#include "ccm/manifest.hpp"

#include <fstream>

#include "json.hpp"

namespace ccm {

const std::string* RunManifest::find(const std::string& key) const {
  for (const auto& [k, v] : config)
    if (k == key) return &v;
  return nullptr;
}

std::string manifest_to_json(const RunManifest& m) {
  nlohmann::ordered_json doc;
  doc["tool"] = m.tool;
  doc["version"] = m.version;
  doc["command"] = m.command;
  doc["timestamp"] = m.timestamp;
  nlohmann::ordered_json cfg;
  for (const auto& [k, v] : m.config) cfg[k] = v;
  doc["config"] = cfg;
  nlohmann::ordered_json outs;
  for (const auto& [k, v] : m.outputs) outs[k] = v;
  doc["outputs"] = outs;
  nlohmann::ordered_json logs;
  for (const auto& [k, v] : m.logs) logs[k] = v;
  doc["logs"] = logs;
  return doc.dump(2) + "\n";
}

RunManifest manifest_from_json(const std::string& text) {
  nlohmann::ordered_json doc;
  try {
    doc = nlohmann::ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("manifest: invalid JSON: ") + e.what());
  }
  RunManifest m;
  try {
    m.tool = doc.value("tool", "ccm");
    m.version = doc.value("version", "");
    m.command = doc.at("command").get<std::string>();
    m.timestamp = doc.value("timestamp", "");
    if (doc.contains("config"))
      for (const auto& [k, v] : doc["config"].items())
        m.config.emplace_back(k, v.get<std::string>());
    if (doc.contains("outputs"))
      for (const auto& [k, v] : doc["outputs"].items())
        m.outputs.emplace_back(k, v.get<std::string>());
    if (doc.contains("logs"))
      for (const auto& [k, v] : doc["logs"].items())
        m.logs.emplace_back(k, v.get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("manifest: ") + e.what());
  }
  return m;
}

void save_manifest(const RunManifest& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("manifest: cannot write " + path);
  out << manifest_to_json(m);
}

RunManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("manifest: cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return manifest_from_json(text);
}

}  // namespace ccm
