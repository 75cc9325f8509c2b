#pragma once

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>

#include "gepc/rng.hpp"
#include "gepc/tensor.hpp"

namespace gepc::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    std::string name = "gepc_test";
    if (info) name += std::string("_") + info->test_suite_name() + "_" + info->name();
    for (auto& ch : name)
      if (ch == '/') ch = '_';
    path_ = std::filesystem::temp_directory_path() / name;
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
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void spit(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

inline Field random_field(const Shape& shape, std::uint64_t seed, std::uint64_t a = 0) {
  CounterRng rng(seed, a);
  return rng.normal_field(shape);
}

inline Field field_of(const Shape& shape, std::initializer_list<double> values) {
  Field f(shape);
  std::ptrdiff_t k = 0;
  for (double v : values) f.array()[k++] = v;
  return f;
}

inline double max_abs_diff(const Field& a, const Field& b) {
  return (a.array() - b.array()).abs().maxCoeff();
}

}  // namespace gepc::testing
