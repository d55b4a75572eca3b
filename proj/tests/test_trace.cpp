#include <doctest.h>

#include "gpusentinel/error.hpp"
#include "gpusentinel/trace.hpp"
#include "support.hpp"

using namespace gpusentinel;

namespace {

Trace small_trace() {
  Trace t;
  t.meta.scenario_id = "t";
  for (int i = 0; i < 4; ++i) {
    t.samples.push_back({static_cast<double>(i), 40, 2800, 65, 1850, 62, 28.0});
    t.kernels.push_back({i + 0.5, "k", 1800, 45, 15, 1850});
    t.labels.push_back(i >= 2 ? Label::miner : Label::benign);
  }
  return t;
}

AbsSample sample_at(std::int64_t ms) { return {ms, 40, 2800, 65, 1850, 62}; }

}  // namespace

TEST_CASE("validate_trace accepts a well-formed trace") { CHECK(validate_trace(small_trace()).empty()); }

TEST_CASE("validate_trace names index and field") {
  Trace t = small_trace();
  t.samples[1].gpu_util = 120;
  const auto errors = validate_trace(t);
  REQUIRE(errors.size() == 1);
  CHECK(errors[0] == "samples[1].gpu_util = 120 outside [0, 100]");
}

TEST_CASE("validate_trace flags ordering, labels and interval") {
  Trace t = small_trace();
  t.samples[2].t = 1.0;
  t.labels.pop_back();
  t.meta.interval_s = 0.0;
  const auto errors = validate_trace(t);
  CHECK(errors.size() >= 3);
  Trace k = small_trace();
  k.kernels[3].t = 0.1;
  CHECK_FALSE(validate_trace(k).empty());
  Trace f = small_trace();
  f.samples[0].fps = -1.0;
  CHECK_FALSE(validate_trace(f).empty());
}

TEST_CASE("first_miner_time finds the first positive label") {
  CHECK(first_miner_time(small_trace()) == 2.0);
  Trace t = small_trace();
  std::fill(t.labels.begin(), t.labels.end(), Label::benign);
  CHECK_FALSE(first_miner_time(t).has_value());
}

TEST_CASE("align_streams with samples only") {
  const Trace t = align_streams({sample_at(5000), sample_at(6000)}, {}, {});
  REQUIRE(t.samples.size() == 2);
  CHECK(t.samples[0].t == 0.0);
  CHECK(t.samples[1].t == 1.0);
  CHECK(t.kernels.empty());
  CHECK_FALSE(t.samples[0].fps.has_value());
  CHECK(t.labels == std::vector<Label>{Label::benign, Label::benign});
}

TEST_CASE("align_streams rebases to the earliest stream") {
  AbsKernel k{4500, "k", 1, 1, 1, 1};
  const Trace t = align_streams({sample_at(5000), sample_at(6000)}, {k}, {});
  CHECK(t.kernels[0].t == 0.0);
  CHECK(t.samples[0].t == 0.5);
}

TEST_CASE("fps attaches to the nearest sample within half an interval") {
  const std::vector<AbsSample> s = {sample_at(0), sample_at(1000), sample_at(2000)};
  SUBCASE("nearest wins") {
    const Trace t = align_streams(s, {}, {{980, 27.0}, {1700, 30.0}});
    CHECK_FALSE(t.samples[0].fps.has_value());
    CHECK(t.samples[1].fps == 27.0);
    CHECK(t.samples[2].fps == 30.0);
  }
  SUBCASE("equidistant goes to the earlier sample") {
    const Trace t = align_streams(s, {}, {{500, 27.0}});
    CHECK(t.samples[0].fps == 27.0);
    CHECK_FALSE(t.samples[1].fps.has_value());
  }
  SUBCASE("a later reading for the same sample wins") {
    const Trace t = align_streams(s, {}, {{990, 27.0}, {1010, 26.0}});
    CHECK(t.samples[1].fps == 26.0);
  }
  SUBCASE("readings beyond half an interval are dropped") {
    const Trace t = align_streams(s, {}, {{2600, 27.0}});
    CHECK_FALSE(t.samples[2].fps.has_value());
  }
}

TEST_CASE("align_streams errors") {
  CHECK_THROWS_WITH_AS(align_streams({}, {}, {}), doctest::Contains("no samples"), DataError);
  CHECK_THROWS_AS(align_streams({sample_at(2000), sample_at(1000)}, {}, {}), DataError);
  AlignOptions opt;
  opt.labels = std::vector<Label>(3, Label::benign);
  CHECK_THROWS_WITH_AS(align_streams({sample_at(0), sample_at(1000), sample_at(2000), sample_at(3000)}, {}, {}, opt),
                       doctest::Contains("4 samples, 3 labels"), DataError);
}

TEST_CASE("align_streams is invariant under translating every timestamp") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto base = testing::random_streams(seed, 40, 1'700'000'000'000);
    auto shifted = base;
    gpusentinel::Rng rng(seed + 1000);
    const std::int64_t shift = static_cast<std::int64_t>(rng.below(1'000'000'000'000)) - 500'000'000'000;
    for (auto& s : shifted.samples) s.abs_ms += shift;
    for (auto& k : shifted.kernels) k.abs_ms += shift;
    for (auto& f : shifted.fps) f.abs_ms += shift;
    const Trace a = align_streams(base.samples, base.kernels, base.fps);
    const Trace b = align_streams(shifted.samples, shifted.kernels, shifted.fps);
    CHECK(a == b);
    CHECK(validate_trace(a).empty());
  }
}
