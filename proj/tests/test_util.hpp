#ifndef INTERAREC_TEST_UTIL_HPP
#define INTERAREC_TEST_UTIL_HPP

#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>

#include <gtest/gtest.h>

#include "interarec/error.hpp"

#define EXPECT_ERRC(stmt, errc)                                                  \
  do {                                                                           \
    try {                                                                        \
      stmt;                                                                      \
      ADD_FAILURE() << "expected " << ::interarec::errc_name(errc);              \
    } catch (const ::interarec::Error& e_) {                                     \
      EXPECT_EQ(e_.code(), errc) << e_.what();                                   \
    }                                                                            \
  } while (0)

namespace interarec::testing {

inline std::string read_fixture(const std::string& name) {
  std::ifstream in(std::filesystem::path(INTERAREC_TEST_FIXTURES) / name, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("interarec-test-" + std::to_string(rd()) + "-" + std::to_string(rd()));
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

  std::filesystem::path write(const std::string& name, const std::string& content) const {
    const auto p = path_ / name;
    std::filesystem::create_directories(p.parent_path());
    std::ofstream(p, std::ios::binary) << content;
    return p;
  }

 private:
  std::filesystem::path path_;
};

}  // namespace interarec::testing

#endif  // INTERAREC_TEST_UTIL_HPP
