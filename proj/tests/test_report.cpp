#include <doctest.h>

#include "gpusentinel/error.hpp"
#include "gpusentinel/report.hpp"
#include "gpusentinel/simulator.hpp"

using namespace gpusentinel;

namespace {

Trace mixed_trace(double onset = 300) {
  ScenarioConfig c;
  c.miner_onset_s = onset;
  return simulate_trace(c);
}

}  // namespace

TEST_CASE("identical traces give zero deltas") {
  const Trace t = simulate_trace(ScenarioConfig{});
  const auto s = summarize_regimes(t, t);
  for (std::size_t c = 0; c < kChannels.size(); ++c) CHECK(s.delta_pct(c) == 0.0);
}

TEST_CASE("mixed trace deltas follow the regimes") {
  const auto s = summarize_mixed(mixed_trace());
  CHECK(*s.delta_pct(0) == doctest::Approx(-50).epsilon(0.1));
  CHECK(*s.delta_pct(1) >= 30.0);
  CHECK(*s.delta_pct(4) < 0.0);  // clock drops under the miner
  CHECK(*s.delta_pct(5) > 0.0);  // kernels run longer
}

TEST_CASE("missing regimes are rejected") {
  const Trace benign = simulate_trace(ScenarioConfig{});
  CHECK_THROWS_WITH_AS(summarize_mixed(benign), doctest::Contains("missing regimes"), DataError);
  ScenarioConfig c;
  c.miner_onset_s = 0;
  CHECK_THROWS_WITH_AS(summarize_mixed(simulate_trace(c)), doctest::Contains("missing regimes"), DataError);
}

TEST_CASE("summary CSV layout") {
  const std::string csv = format_summary_csv(summarize_mixed(mixed_trace()));
  CHECK(csv.rfind("channel,benign_mean,miner_mean,delta_pct\nfps,", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 9);
  RegimeSummary empty;
  empty.benign_mean[0] = 0.0;
  empty.miner_mean[0] = 3.0;
  CHECK_FALSE(empty.delta_pct(0).has_value());
  CHECK(format_summary_csv(empty).find("\nfps,0.0000,3.0000,\n") != std::string::npos);
}

TEST_CASE("charts are self-contained and deterministic") {
  const Trace t = mixed_trace();
  const std::string a = render_line_chart(fps_chart(t));
  CHECK(a == render_line_chart(fps_chart(mixed_trace())));
  CHECK(a.rfind("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"400\"", 0) == 0);
  CHECK(a.find("miner onset (300 s)") != std::string::npos);
  CHECK(a.find("Time (s)") != std::string::npos);
  CHECK(a.find("Frame rate (fps)") != std::string::npos);
  CHECK(a.find("href") == std::string::npos);
  CHECK(a.find("</svg>") != std::string::npos);
  const std::string p = render_line_chart(power_chart(simulate_trace(ScenarioConfig{}), t));
  CHECK(p.find("Power (W)") != std::string::npos);
  CHECK(p.find("with miner") != std::string::npos);
  CHECK(p.find("miner onset") == std::string::npos);
  ChartSpec empty{"t & <x>", "y", {}, std::nullopt};
  CHECK(render_line_chart(empty).find("t &amp; &lt;x&gt;") != std::string::npos);
}
