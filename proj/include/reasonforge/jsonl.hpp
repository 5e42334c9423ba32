#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "reasonforge/error.hpp"

namespace reasonforge {

// ordered_json keeps object keys in insertion order so serialized records are
// byte-stable across runs.
using Json = nlohmann::ordered_json;

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw validation_error("cannot open file: " + path.string());
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return data;
}

inline void write_file(const std::filesystem::path& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw validation_error("cannot open file for writing: " + path.string());
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw validation_error("write failed: " + path.string());
}

/// Calls fn(record, line_number) for every non-blank line. Line numbers are
/// 1-based. A UTF-8 BOM on the first line is stripped; parse failures carry
/// the line number.
inline void for_each_jsonl(const std::filesystem::path& path,
                           const std::function<void(const Json&, std::size_t)>& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw validation_error("cannot open file: " + path.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (lineno == 1 && line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xef &&
        static_cast<unsigned char>(line[1]) == 0xbb && static_cast<unsigned char>(line[2]) == 0xbf) {
      line.erase(0, 3);
    }
    bool blank = true;
    for (char c : line) {
      if (c != ' ' && c != '\t') {
        blank = false;
        break;
      }
    }
    if (blank) continue;
    Json rec;
    try {
      rec = Json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw validation_error(path.string() + ":" + std::to_string(lineno) +
                             ": malformed JSON line: " + e.what());
    }
    if (!rec.is_object()) {
      throw validation_error(path.string() + ":" + std::to_string(lineno) +
                             ": expected a JSON object");
    }
    fn(rec, lineno);
  }
}

class JsonlWriter {
 public:
  explicit JsonlWriter(const std::filesystem::path& path)
      : path_(path.string()), out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw validation_error("cannot open file for writing: " + path_);
  }

  void write(const Json& rec) {
    out_ << rec.dump() << '\n';
    if (!out_) throw validation_error("write failed: " + path_);
  }

  void flush() { out_.flush(); }

  void close() {
    out_.close();
    if (out_.fail()) throw validation_error("close failed: " + path_);
  }

 private:
  std::string path_;
  std::ofstream out_;
};

inline std::string require_string(const Json& rec, const char* key,
                                  const std::string& context) {
  auto it = rec.find(key);
  if (it == rec.end() || !it->is_string()) {
    throw validation_error(context + ": missing or non-string field \"" + key + "\"");
  }
  return it->get<std::string>();
}

}  // namespace reasonforge
