#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "reasonforge/jsonl.hpp"
#include "reasonforge/rng.hpp"
#include "reasonforge/version.hpp"

namespace reasonforge {

inline std::string to_hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[v & 0xF];
    v >>= 4;
  }
  return out;
}

inline std::string file_digest(const std::filesystem::path& path) {
  return to_hex64(fnv1a64(read_file(path)));
}

/// Reproducibility sidecar: resolved config, seeds, and input digests. No
/// timestamps, so identical runs produce identical manifests.
inline Json make_manifest(const std::string& command, const Json& resolved_config,
                          const std::vector<std::pair<std::string, std::filesystem::path>>& inputs,
                          const std::vector<std::filesystem::path>& outputs) {
  Json m;
  m["tool"] = "reason-forge";
  m["version"] = kVersion;
  m["command"] = command;
  m["config"] = resolved_config;
  Json ins = Json::object();
  for (const auto& [label, path] : inputs) {
    Json entry;
    entry["path"] = path.string();
    entry["fnv1a64"] = file_digest(path);
    ins[label] = entry;
  }
  m["inputs"] = ins;
  Json outs = Json::array();
  for (const auto& p : outputs) outs.push_back(p.string());
  m["outputs"] = outs;
  return m;
}

/// Writes `<output>.manifest.json` beside the named output file.
inline std::filesystem::path write_manifest(const std::filesystem::path& output,
                                            const Json& manifest) {
  std::filesystem::path side = output;
  side += ".manifest.json";
  write_file(side, manifest.dump(2) + "\n");
  return side;
}

}  // namespace reasonforge
