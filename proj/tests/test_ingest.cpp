#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <regex>

#include "gpusentinel/error.hpp"
#include "gpusentinel/ingest.hpp"
#include "gpusentinel/simulator.hpp"
#include "support.hpp"

using namespace gpusentinel;
using testing::fixture;

namespace {

std::string error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const DataError& e) {
    return e.what();
  }
  return "";
}

// Inserts a random run of blanks after every comma and at both line ends.
std::string pad_commas(const std::string& text, Rng& rng) {
  std::string out;
  const auto blanks = [&rng] { return std::string(rng.below(3), rng.below(2) ? ' ' : '\t'); };
  bool line_start = true;
  bool in_quotes = false;
  for (char c : text) {
    if (line_start) out += blanks();
    line_start = false;
    if (c == '"') in_quotes = !in_quotes;
    if (c == '\n') {
      out += blanks();
      line_start = true;
    }
    if (c == ',' && !in_quotes) {
      out += blanks() + "," + blanks();
      continue;
    }
    out += c;
  }
  return out;
}

}  // namespace

TEST_CASE("timestamps parse and format exactly") {
  const auto ms = parse_timestamp("2025/08/01 12:00:00.400");
  CHECK(format_timestamp(ms) == "2025/08/01 12:00:00.400");
  CHECK(parse_timestamp("1970/01/01 00:00:01.000") == 1000);
  CHECK(parse_timestamp("2024/02/29 00:00:00.000") - parse_timestamp("2024/02/28 00:00:00.000") == 86'400'000);
  CHECK_THROWS_AS(parse_timestamp("2025/13/01 00:00:00.000"), DataError);
  CHECK_THROWS_AS(parse_timestamp("2025/02/30 00:00:00.000"), DataError);
  CHECK_THROWS_AS(parse_timestamp("2025-08-01 12:00:00.000"), DataError);
  CHECK_THROWS_AS(parse_timestamp("2025/08/01 12:00:00"), DataError);
  Rng rng(5);
  for (int i = 0; i < 5000; ++i) {
    const auto v = static_cast<std::int64_t>(rng.below(4'102'444'800'000));  // up to 2100
    CHECK(parse_timestamp(format_timestamp(v)) == v);
  }
}

TEST_CASE("sampler line example parses field by field") {
  const auto rows = parse_sampler_csv("2025/08/01 12:00:00.000, 40, 2800, 65.00, 1650, 62\n");
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].timestamp_ms == parse_timestamp("2025/08/01 12:00:00.000"));
  CHECK(rows[0].gpu_util == 40);
  CHECK(rows[0].mem_used == 2800);
  CHECK(rows[0].power == 65.0);
  CHECK(rows[0].sm_clock == 1650);
  CHECK(rows[0].temperature == 62);
}

TEST_CASE("kernel and fps examples") {
  const auto k = parse_kernel_csv("\"yolov8_conv\",2025/08/01 12:00:00.400,1800.0,45.2,15.1,1850");
  REQUIRE(k.size() == 1);
  CHECK(k[0].kernel_name == "yolov8_conv");
  CHECK(k[0].duration_us == 1800.0);
  CHECK(k[0].sm_freq_mhz == 1850.0);
  const auto f = parse_fps_log("2025/08/01 12:00:00.000,28.1");
  REQUIRE(f.size() == 1);
  CHECK(f[0].fps == 28.1);
  CHECK(parse_sampler_csv("").empty());
  CHECK(parse_kernel_csv("").empty());
  CHECK(parse_fps_log("").empty());
  CHECK(parse_labels("").empty());
}

TEST_CASE("parse errors carry counts, fields and line numbers") {
  CHECK(error_of([] { parse_sampler_csv("2025/08/01 12:00:00.000, 40, 2800, 65.00, 1650"); }) ==
        "expected 6 columns, found 5 at line 1");
  CHECK(error_of([] { parse_fps_log("2025/08/01 12:00:00.000,-1"); }).find("negative fps") != std::string::npos);
}

TEST_CASE("fixtures round-trip bit-exactly") {
  const auto sampler = read_file(fixture("sampler.csv"));
  const auto kernel = read_file(fixture("kernel.csv"));
  const auto fps = read_file(fixture("fps.log"));
  CHECK(format_sampler_csv(parse_sampler_csv(sampler)) == sampler);
  CHECK(format_kernel_csv(parse_kernel_csv(kernel)) == kernel);
  CHECK(format_fps_log(parse_fps_log(fps)) == fps);
  const auto rows = parse_kernel_csv(kernel);
  REQUIRE(rows.size() == 6);
  CHECK(rows[2].kernel_name == "gemm, fused");
  CHECK(rows[5].kernel_name == "say \"hi\"");
}

TEST_CASE("header and whitespace variants parse to the same rows") {
  const auto plain = parse_sampler_csv(read_file(fixture("sampler.csv")));
  const auto header = parse_sampler_csv(read_file(fixture("sampler_header.csv")));
  const auto spaced = parse_sampler_csv(read_file(fixture("sampler_spaced.csv")));
  REQUIRE(header.size() == 2);
  CHECK(header[0] == plain[0]);
  CHECK(header[1] == plain[1]);
  CHECK(spaced == header);
}

TEST_CASE("every malformed fixture yields a line-numbered error") {
  const std::vector<std::pair<std::string, std::string>> cases = {
      {"malformed_sampler_columns.csv", "expected 6 columns, found 5 at line 1"},
      {"malformed_sampler_number.csv", "invalid power 'abc' at line 3"},
      {"malformed_sampler_timestamp.csv", "at line 2"},
      {"malformed_kernel_decimal.csv", "invalid sm_throughput_pct '4x.8' at line 3"},
      {"malformed_kernel_quote.csv", "at line 2"},
      {"malformed_fps_negative.log", "at line 2"},
      {"malformed_labels.txt", "at line 3"},
  };
  for (const auto& [name, expected] : cases) {
    CAPTURE(name);
    const auto text = read_file(fixture(name));
    const std::string msg = error_of([&] {
      if (name.find("sampler") != std::string::npos) parse_sampler_csv(text);
      else if (name.find("kernel") != std::string::npos) parse_kernel_csv(text);
      else if (name.find("fps") != std::string::npos) parse_fps_log(text);
      else parse_labels(text);
    });
    CHECK(msg.find(expected) != std::string::npos);
    CHECK(std::regex_search(msg, std::regex("at line [0-9]+")));
  }
  CHECK(error_of([] { load_canonical(fixture("malformed_trace_version.trace")); }).find("unsupported version") !=
        std::string::npos);
}

TEST_CASE("random rows survive format then parse") {
  Rng rng(21);
  for (int round = 0; round < 200; ++round) {
    std::vector<RawSamplerRow> s;
    std::vector<RawKernelRow> k;
    std::vector<RawFpsRow> f;
    for (std::uint64_t i = 0, n = rng.below(20); i < n; ++i) {
      const auto ts = static_cast<std::int64_t>(rng.below(4'000'000'000'000));
      // Mix customary-precision values with arbitrary doubles.
      const auto v = [&rng](double lo, double hi, int dec) {
        const double x = rng.uniform(lo, hi);
        if (rng.below(2)) return x;
        const double p = std::pow(10.0, dec);
        return std::round(x * p) / p;
      };
      s.push_back({ts, v(0, 100, 0), v(0, 8192, 0), v(0, 300, 2), v(300, 2100, 0), v(20, 100, 0)});
      std::string name;
      for (std::uint64_t c = 1 + rng.below(8); c > 0; --c) name += "ab ,\"_"[rng.below(6)];
      k.push_back({name, ts, v(1, 1e5, 1), v(0, 100, 1), v(0, 100, 1), v(300, 2100, 0)});
      f.push_back({ts, v(0, 120, 1)});
    }
    CHECK(parse_sampler_csv(format_sampler_csv(s)) == s);
    CHECK(parse_kernel_csv(format_kernel_csv(k)) == k);
    CHECK(parse_fps_log(format_fps_log(f)) == f);
  }
}

TEST_CASE("blanks around commas never change parse results") {
  Rng rng(8);
  for (const char* name : {"sampler.csv", "kernel.csv", "fps.log"}) {
    const auto text = read_file(fixture(name));
    for (int i = 0; i < 50; ++i) {
      const auto padded = pad_commas(text, rng);
      if (std::string(name) == "sampler.csv") CHECK(parse_sampler_csv(padded) == parse_sampler_csv(text));
      if (std::string(name) == "kernel.csv") CHECK(parse_kernel_csv(padded) == parse_kernel_csv(text));
      if (std::string(name) == "fps.log") CHECK(parse_fps_log(padded) == parse_fps_log(text));
    }
  }
}

TEST_CASE("load_trace on the full fixture set") {
  LoadOptions opt;
  opt.kernel_path = fixture("kernel.csv");
  opt.fps_path = fixture("fps.log");
  opt.labels_path = fixture("labels.txt");
  const Trace t = load_trace(fixture("sampler.csv"), opt);
  CHECK(validate_trace(t).empty());
  CHECK(t.meta.scenario_id == "sampler");
  CHECK(t.meta.interval_s == 1.0);
  REQUIRE(t.samples.size() == 6);
  CHECK(t.kernels.size() == 6);
  CHECK(t.samples[1].fps == 27.9);
  CHECK(t.kernels[0].t == 0.4);
  CHECK(first_miner_time(t) == 3.0);
}

TEST_CASE("load_trace defaults and label mismatch") {
  const Trace t = load_trace(fixture("sampler.csv"));
  CHECK(t.kernels.empty());
  CHECK(std::all_of(t.labels.begin(), t.labels.end(), [](Label l) { return l == Label::benign; }));
  testing::TempDir dir("labels");
  write_file(dir / "s.csv", "2025/08/01 12:00:00.000, 40, 2800, 65.00, 1650, 62\n"
                            "2025/08/01 12:00:01.000, 40, 2800, 65.00, 1650, 62\n"
                            "2025/08/01 12:00:02.000, 40, 2800, 65.00, 1650, 62\n"
                            "2025/08/01 12:00:03.000, 40, 2800, 65.00, 1650, 62\n");
  write_file(dir / "l.txt", "0\n0\n1\n");
  LoadOptions opt;
  opt.labels_path = dir / "l.txt";
  CHECK(error_of([&] { load_trace(dir / "s.csv", opt); }).find("4 samples, 3 labels") != std::string::npos);
  CHECK_THROWS_AS(load_trace(dir / "missing.csv"), DataError);
}

TEST_CASE("canonical trace files round-trip to structural equality") {
  ScenarioConfig c;
  c.miner_onset_s = 300;
  c.description = "round trip, with \"quotes\"";
  const Trace t = simulate_trace(c);
  REQUIRE(t.samples.size() == 600);
  testing::TempDir dir("canon");
  save_trace(t, dir / "a.trace");
  const Trace back = load_canonical(dir / "a.trace");
  CHECK(back == t);
  save_trace(back, dir / "b.trace");
  CHECK(read_file(dir / "a.trace") == read_file(dir / "b.trace"));

  Trace odd = t;
  odd.meta.onset_s.reset();
  odd.meta.seed = ~0ULL;
  odd.samples[3].fps.reset();
  odd.kernels.clear();
  CHECK(deserialize_trace(serialize_trace(odd)) == odd);
}

TEST_CASE("canonical trace loader rejects bad files") {
  CHECK_THROWS_WITH_AS(deserialize_trace("GPUSENTINEL-TRACE v99\n"), doctest::Contains("unsupported version"),
                       DataError);
  CHECK_THROWS_AS(deserialize_trace("hello\n"), DataError);
  const Trace t = simulate_trace(ScenarioConfig{});
  std::string text = serialize_trace(t);
  text.resize(text.size() / 2);
  CHECK_THROWS_AS(deserialize_trace(text), DataError);
}

TEST_CASE("export_raw produces parseable logs at customary precision") {
  ScenarioConfig c;
  c.duration_s = 20;
  c.miner_onset_s = 10;
  const Trace t = simulate_trace(c);
  const auto logs = export_raw(t, 1'700'000'000'000);
  const auto text = format_sampler_csv(logs.sampler);
  CHECK(parse_sampler_csv(text) == logs.sampler);
  CHECK(std::regex_search(text, std::regex("^2023/11/14 22:13:20\\.000, [0-9]+, [0-9]+, [0-9]+\\.[0-9]{2}, ")));
  const Trace back = align_streams([&] {
    std::vector<AbsSample> v;
    for (const auto& r : logs.sampler) v.push_back(to_abs(r));
    return v;
  }(), {}, {});
  CHECK(back.samples.size() == t.samples.size());
  CHECK(back.samples.back().t == t.samples.back().t);
}
