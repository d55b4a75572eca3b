#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "gpusentinel/ingest.hpp"
#include "gpusentinel/rng.hpp"
#include "gpusentinel/trace.hpp"

namespace testing {

inline std::filesystem::path fixture(const std::string& name) {
  return std::filesystem::path(GS_FIXTURE_DIR) / name;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("gs_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
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
  std::string operator/(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

// Runs the command line through the shell and returns its exit status.
inline int run(const std::string& command) {
  const int status = std::system(command.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

inline std::string cli() { return GS_CLI_PATH; }

// Random but well-formed raw streams on a jittered 1 s grid.
struct RandomStreams {
  std::vector<gpusentinel::AbsSample> samples;
  std::vector<gpusentinel::AbsKernel> kernels;
  std::vector<gpusentinel::FpsReading> fps;
};

inline RandomStreams random_streams(std::uint64_t seed, std::size_t n, std::int64_t base_ms) {
  gpusentinel::Rng rng(seed);
  RandomStreams s;
  std::int64_t t = base_ms;
  for (std::size_t i = 0; i < n; ++i) {
    s.samples.push_back({t, rng.uniform(0, 100), rng.uniform(0, 8000), rng.uniform(20, 200), rng.uniform(300, 2000),
                         rng.uniform(30, 90)});
    const auto kernels = rng.below(3);
    for (std::uint64_t k = 0; k < kernels; ++k)
      s.kernels.push_back({t + static_cast<std::int64_t>(rng.below(1000)), k % 2 ? "a" : "b, c", rng.uniform(1, 5000),
                           rng.uniform(0, 100), rng.uniform(0, 100), rng.uniform(300, 2000)});
    if (rng.below(4) != 0)
      s.fps.push_back({t + static_cast<std::int64_t>(rng.below(1400)) - 700, rng.uniform(0, 60)});
    t += 1000 + static_cast<std::int64_t>(rng.below(3));
  }
  const auto by_ms = [](const auto& a, const auto& b) { return a.abs_ms < b.abs_ms; };
  std::stable_sort(s.kernels.begin(), s.kernels.end(), by_ms);
  std::stable_sort(s.fps.begin(), s.fps.end(), by_ms);
  return s;
}

}  // namespace testing
