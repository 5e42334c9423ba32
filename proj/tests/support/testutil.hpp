#pragma once

// Shared helpers for the test suite: scratch directories, stdout capture,
// and the path to checked-in test data.

#include <unistd.h>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

namespace rftest {

inline std::filesystem::path data_dir() {
#ifdef RF_TEST_DATA_DIR
  return std::filesystem::path(RF_TEST_DATA_DIR);
#else
  return std::filesystem::current_path();
#endif
}

/// Unique scratch directory, removed recursively on destruction.
class TempDir {
 public:
  TempDir()
      : path(std::filesystem::temp_directory_path() /
             ("rftest-" + std::to_string(static_cast<unsigned long>(getpid())) + "-" +
              std::to_string(next_id()))) {
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::filesystem::path operator/(const std::string& name) const { return path / name; }

  const std::filesystem::path path;

 private:
  static unsigned next_id() {
    static std::atomic<unsigned> counter{0};
    return counter++;
  }
};

/// Redirects std::cout into a buffer for the object's lifetime.
class CoutCapture {
 public:
  CoutCapture() : old_(std::cout.rdbuf(buffer_.rdbuf())) {}
  ~CoutCapture() { std::cout.rdbuf(old_); }
  std::string str() const { return buffer_.str(); }

 private:
  std::ostringstream buffer_;
  std::streambuf* old_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace rftest
