#pragma once

#include <filesystem>
#include <random>
#include <stdexcept>
#include <string>

namespace testutil {

// Unique scratch directory under the system temp root, removed on scope
// exit. Each test that touches the filesystem gets its own instance so
// cases stay independent.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    auto root = std::filesystem::temp_directory_path();
    std::random_device rd;
    for (int attempt = 0; attempt < 64; ++attempt) {
      auto candidate = root / ("natt_" + tag + "_" + std::to_string(rd()));
      std::error_code ec;
      if (std::filesystem::create_directory(candidate, ec)) {
        path_ = candidate;
        return;
      }
    }
    throw std::runtime_error("cannot create scratch directory");
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  [[nodiscard]] const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace testutil
