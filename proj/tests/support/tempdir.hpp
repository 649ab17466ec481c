#pragma once

#include <gtest/gtest.h>
#include <unistd.h>

#include <filesystem>
#include <string>

namespace swings::oracle {

// Per-test scratch directory, removed on destruction.
class TempDir {
 public:
  // Named after the running test; suite-level fixtures pass a tag instead.
  explicit TempDir(const std::string& tag = "") {
    std::string name = tag;
    if (name.empty()) {
      const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
      name = info ? std::string(info->test_suite_name()) + "_" + info->name() : "scratch";
    }
    path_ = std::filesystem::temp_directory_path() / ("swings_" + std::to_string(::getpid()) + "_" + name);
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace swings::oracle
