#include <doctest.h>

#include <algorithm>

#include "gpusentinel/error.hpp"
#include "gpusentinel/rng.hpp"
#include "gpusentinel/simulator.hpp"

using namespace gpusentinel;

namespace {

double mean_of(const Trace& t, double TelemetrySample::*field, bool miner) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < t.samples.size(); ++i)
    if ((t.labels[i] == Label::miner) == miner) {
      sum += t.samples[i].*field;
      ++n;
    }
  return sum / static_cast<double>(n);
}

}  // namespace

TEST_CASE("default regimes carry the measured operating points") {
  const auto b = default_benign_params();
  const auto m = default_miner_params();
  CHECK(b.power.mean == 65);
  CHECK(b.fps.mean == 28);
  CHECK(b.gpu_util.mean == 40);
  CHECK(b.mem_used.mean == 2800);
  CHECK(b.sm_throughput.mean == 45);
  CHECK(m.fps.mean == 14);
  CHECK(m.gpu_util.mean == 99);
  CHECK(m.mem_used.mean == 3900);
  CHECK(m.power.lo == 95);
  CHECK(m.power.hi == 159);
  CHECK(m.sm_clock.mean < b.sm_clock.mean);
  CHECK(m.duration_us.mean > b.duration_us.mean);
  CHECK(m.sm_throughput.std < b.sm_throughput.std);
  CHECK_NOTHROW(validate_regime(b, "benign"));
  CHECK_NOTHROW(validate_regime(m, "miner"));
}

TEST_CASE("config validation") {
  ScenarioConfig c;
  c.duration_s = 0;
  CHECK_THROWS_WITH_AS(validate_config(c), "empty scenario", UsageError);
  c = ScenarioConfig{};
  c.miner_onset_s = 600;
  CHECK_THROWS_AS(validate_config(c), UsageError);
  c = ScenarioConfig{};
  c.interval_s = -1;
  CHECK_THROWS_AS(validate_config(c), UsageError);
  c = ScenarioConfig{};
  c.benign.gpu_util.hi = 120;
  CHECK_THROWS_AS(validate_config(c), UsageError);
  c = ScenarioConfig{};
  c.miner.power.std = -1;
  CHECK_THROWS_AS(validate_config(c), UsageError);
}

TEST_CASE("config text applies overrides and round-trips") {
  ScenarioConfig c;
  apply_config_text(c, "# comment\nduration_s = 120\nonset_s = 30\nminer.power.mean = 120 # inline\nseed = 9\n");
  CHECK(c.duration_s == 120);
  CHECK(c.miner_onset_s == 30.0);
  CHECK(c.miner.power.mean == 120);
  CHECK(c.seed == 9);
  ScenarioConfig d;
  apply_config_text(d, format_config(c));
  CHECK(format_config(d) == format_config(c));
  apply_config_text(d, "onset_s = none");
  CHECK_FALSE(d.miner_onset_s.has_value());
  CHECK_THROWS_AS(apply_config_text(d, "bogus = 1"), UsageError);
  CHECK_THROWS_AS(apply_config_text(d, "duration_s = abc"), UsageError);
  CHECK_THROWS_AS(apply_config_text(d, "no equals sign"), UsageError);
}

TEST_CASE("mixed trace label flips at the onset") {
  ScenarioConfig c;
  c.miner_onset_s = 300;
  const Trace t = simulate_trace(c);
  REQUIRE(t.samples.size() == 600);
  REQUIRE(t.kernels.size() == 600);
  CHECK(validate_trace(t).empty());
  for (std::size_t i = 0; i < t.samples.size(); ++i)
    CHECK((t.labels[i] == Label::miner) == (t.samples[i].t >= 300.0));
  CHECK(first_miner_time(t) == 300.0);
  CHECK(t.kernels[299].kernel_name == "yolov8_conv");
  CHECK(t.kernels[300].kernel_name == "trex_kawpow");
  CHECK(t.meta.rng == kRngAlgorithm);
}

TEST_CASE("simulation is a pure function of the config") {
  ScenarioConfig c;
  c.miner_onset_s = 200;
  CHECK(simulate_trace(c) == simulate_trace(c));
  ScenarioConfig d = c;
  d.seed = 43;
  CHECK_FALSE(simulate_trace(c).samples == simulate_trace(d).samples);
}

TEST_CASE("every draw respects its regime's clip bounds") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    ScenarioConfig c;
    c.seed = seed;
    c.miner_onset_s = 100;
    const Trace t = simulate_trace(c);
    for (std::size_t i = 0; i < t.samples.size(); ++i) {
      const auto& p = t.labels[i] == Label::miner ? c.miner : c.benign;
      const auto& s = t.samples[i];
      CHECK((s.power >= p.power.lo && s.power <= p.power.hi));
      CHECK((s.gpu_util >= 0 && s.gpu_util <= 100));
      CHECK((*s.fps >= p.fps.lo && *s.fps <= p.fps.hi));
      CHECK((t.kernels[i].sm_throughput >= 0 && t.kernels[i].sm_throughput <= 100));
    }
  }
}

TEST_CASE("interval and duration set the sample count") {
  ScenarioConfig c;
  c.duration_s = 10;
  c.interval_s = 0.1;
  CHECK(simulate_trace(c).samples.size() == 100);
  c.interval_s = 3;
  CHECK(simulate_trace(c).samples.size() == 3);
}

TEST_CASE("ramp blends the regimes") {
  ScenarioConfig c;
  c.miner_onset_s = 300;
  c.ramp_s = 100;
  c.benign.power.std = 0;
  c.miner.power.std = 0;
  const Trace t = simulate_trace(c);
  CHECK(t.samples[300].power == doctest::Approx(95.0));  // mean 65 clipped up to the miner floor
  CHECK(t.samples[350].power == doctest::Approx(95.0));  // 87.5 before clipping
  CHECK(t.samples[380].power == doctest::Approx(101.0));
  CHECK(t.samples[450].power == doctest::Approx(110.0));
}

TEST_CASE("simulated regimes land near their configured means") {
  ScenarioConfig c;
  c.miner_onset_s = 300;
  const Trace t = simulate_trace(c);
  CHECK(mean_of(t, &TelemetrySample::gpu_util, false) == doctest::Approx(40).epsilon(0.05));
  CHECK(mean_of(t, &TelemetrySample::power, true) == doctest::Approx(110).epsilon(0.05));
}

TEST_CASE("inject_miner leaves the benign prefix alone") {
  const Trace b = simulate_trace(ScenarioConfig{});
  const Trace m = inject_miner(b, 400, default_miner_params(), 5, 7);
  for (std::size_t i = 0; i < 400; ++i) {
    CHECK(m.samples[i] == b.samples[i]);
    CHECK(m.labels[i] == Label::benign);
  }
  for (std::size_t i = 400; i < 600; ++i) {
    CHECK(m.labels[i] == Label::miner);
    CHECK((m.samples[i].power >= 95 && m.samples[i].power <= 159));
  }
  CHECK(m.meta.onset_s == 400.0);
  CHECK(first_miner_time(m) == 400.0);
  CHECK_THROWS_WITH_AS(inject_miner(b, 700, default_miner_params(), 5, 7), "onset beyond trace end", UsageError);
}

TEST_CASE("corpus layout and per-trace seeds") {
  const auto corpus = make_corpus(2, 3, ScenarioConfig{}, 42, Exec::serial);
  REQUIRE(corpus.size() == 5);
  CHECK(corpus[0].meta.scenario_id == "benign_000");
  CHECK(corpus[2].meta.scenario_id == "mixed_000");
  CHECK(corpus[4].meta.scenario_id == "mixed_002");
  CHECK_FALSE(corpus[0].meta.onset_s.has_value());
  for (std::size_t i = 2; i < 5; ++i) {
    REQUIRE(corpus[i].meta.onset_s.has_value());
    CHECK((*corpus[i].meta.onset_s >= 120 && *corpus[i].meta.onset_s <= 480));
  }
  CHECK(corpus[1].meta.seed == derive_seed(42, 1));
  ScenarioConfig fixed;
  fixed.miner_onset_s = 300;
  const auto f = make_corpus(0, 2, fixed, 1, Exec::serial);
  CHECK(f[0].meta.onset_s == 300.0);
  CHECK(f[1].meta.onset_s == 300.0);
  CHECK_THROWS_AS(make_corpus(0, 0, ScenarioConfig{}, 1), UsageError);
}
