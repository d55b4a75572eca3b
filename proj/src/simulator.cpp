#include "gpusentinel/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "gpusentinel/csv.hpp"
#include "gpusentinel/error.hpp"
#include "gpusentinel/numfmt.hpp"
#include "gpusentinel/rng.hpp"

namespace gpusentinel {

const std::array<RegimeChannel, 9> kRegimeChannels = {{
    {"fps", &RegimeParams::fps},
    {"power", &RegimeParams::power},
    {"gpu_util", &RegimeParams::gpu_util},
    {"mem_used", &RegimeParams::mem_used},
    {"sm_clock", &RegimeParams::sm_clock},
    {"temperature", &RegimeParams::temperature},
    {"duration_us", &RegimeParams::duration_us},
    {"sm_throughput", &RegimeParams::sm_throughput},
    {"dram_throughput", &RegimeParams::dram_throughput},
}};

RegimeParams default_benign_params() {
  RegimeParams p;
  p.fps = {28.0, 1.0, 0.0, 60.0};
  p.power = {65.0, 4.0, 0.0, 250.0};
  p.gpu_util = {40.0, 8.0, 0.0, 100.0};
  p.mem_used = {2800.0, 100.0, 0.0, 8192.0};
  p.sm_clock = {1850.0, 30.0, 300.0, 2100.0};
  p.temperature = {62.0, 2.0, 20.0, 100.0};
  p.duration_us = {1800.0, 400.0, 100.0, 1.0e6};
  p.sm_throughput = {45.0, 12.0, 0.0, 100.0};
  p.dram_throughput = {15.0, 5.0, 0.0, 100.0};
  p.kernel_name = "yolov8_conv";
  return p;
}

RegimeParams default_miner_params() {
  RegimeParams p;
  p.fps = {14.0, 1.0, 0.0, 60.0};
  p.power = {110.0, 12.0, 95.0, 159.0};
  p.gpu_util = {99.0, 0.5, 0.0, 100.0};
  p.mem_used = {3900.0, 80.0, 0.0, 8192.0};
  p.sm_clock = {1790.0, 25.0, 300.0, 2100.0};
  p.temperature = {74.0, 2.0, 20.0, 100.0};
  p.duration_us = {3500.0, 500.0, 100.0, 1.0e6};
  p.sm_throughput = {92.0, 2.0, 0.0, 100.0};
  p.dram_throughput = {38.0, 6.0, 0.0, 100.0};
  p.kernel_name = "trex_kawpow";
  return p;
}

void validate_regime(const RegimeParams& params, std::string_view which) {
  for (const auto& ch : kRegimeChannels) {
    const ChannelParams& c = params.*ch.member;
    const auto name = std::string(which) + "." + std::string(ch.name);
    if (!std::isfinite(c.mean) || !std::isfinite(c.std) || !std::isfinite(c.lo) || !std::isfinite(c.hi))
      throw UsageError(name + ": parameters must be finite");
    if (c.std < 0.0) throw UsageError(name + ": std must be >= 0");
    if (c.lo > c.hi) throw UsageError(name + ": lo exceeds hi");
    if (c.mean < c.lo || c.mean > c.hi) throw UsageError(name + ": mean outside clip bounds");
  }
  for (auto pct : {&RegimeParams::gpu_util, &RegimeParams::sm_throughput, &RegimeParams::dram_throughput}) {
    const ChannelParams& c = params.*pct;
    if (c.lo < 0.0 || c.hi > 100.0) throw UsageError(std::string(which) + ": percent channel clip must lie in [0, 100]");
  }
  for (auto pos : {&RegimeParams::duration_us, &RegimeParams::sm_clock}) {
    if ((params.*pos).lo <= 0.0) throw UsageError(std::string(which) + ": duration_us and sm_clock need lo > 0");
  }
  for (auto nonneg : {&RegimeParams::fps, &RegimeParams::power, &RegimeParams::mem_used}) {
    if ((params.*nonneg).lo < 0.0) throw UsageError(std::string(which) + ": fps, power and mem_used need lo >= 0");
  }
  if (params.kernel_name.empty()) throw UsageError(std::string(which) + ": kernel_name is empty");
}

void validate_config(const ScenarioConfig& config) {
  if (!(config.duration_s > 0.0)) throw UsageError("empty scenario");
  if (!(config.interval_s > 0.0)) throw UsageError("interval_s must be positive");
  if (config.interval_s > config.duration_s) throw UsageError("empty scenario");
  if (config.miner_onset_s && !(*config.miner_onset_s >= 0.0 && *config.miner_onset_s < config.duration_s))
    throw UsageError("onset_s must lie in [0, duration_s)");
  if (!(config.ramp_s >= 0.0)) throw UsageError("ramp_s must be >= 0");
  validate_regime(config.benign, "benign");
  validate_regime(config.miner, "miner");
}

namespace {

double number_value(std::string_view key, std::string_view text) {
  double v = 0.0;
  if (!parse_double(text, v)) throw UsageError("invalid value for " + std::string(key) + ": '" + std::string(text) + "'");
  return v;
}

bool set_regime_key(RegimeParams& params, std::string_view rest, std::string_view value,
                    std::string_view full_key) {
  if (rest == "kernel_name") {
    params.kernel_name = std::string(value);
    return true;
  }
  const auto dot = rest.find('.');
  if (dot == std::string_view::npos) return false;
  const auto channel = rest.substr(0, dot);
  const auto field = rest.substr(dot + 1);
  for (const auto& ch : kRegimeChannels) {
    if (ch.name != channel) continue;
    ChannelParams& c = params.*ch.member;
    double* target = field == "mean" ? &c.mean : field == "std" ? &c.std : field == "lo" ? &c.lo
                   : field == "hi"   ? &c.hi   : nullptr;
    if (!target) return false;
    *target = number_value(full_key, value);
    return true;
  }
  return false;
}

double channel_value(Rng& rng, double mean, double std, double lo, double hi) {
  // Always consume the variate so the stream stays aligned across channels.
  const double z = rng.normal();
  return std::clamp(mean + std * z, lo, hi);
}

double lerp(double a, double b, double w) { return a + (b - a) * w; }

double ramp_weight(double t, double onset, double ramp) {
  if (ramp <= 0.0) return 1.0;
  return std::min(1.0, (t - onset) / ramp);
}

std::size_t sample_count(const ScenarioConfig& c) {
  return static_cast<std::size_t>(std::floor(c.duration_s / c.interval_s + 1e-9));
}

}  // namespace

void apply_config_text(ScenarioConfig& config, std::string_view text) {
  std::size_t line_no = 0;
  for (auto raw : csv::lines(text)) {
    ++line_no;
    auto line = raw;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw UsageError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (key == "scenario_id") config.scenario_id = std::string(value);
    else if (key == "description") config.description = std::string(value);
    else if (key == "duration_s") config.duration_s = number_value(key, value);
    else if (key == "interval_s") config.interval_s = number_value(key, value);
    else if (key == "ramp_s") config.ramp_s = number_value(key, value);
    else if (key == "onset_s") {
      if (value.empty() || value == "none") config.miner_onset_s.reset();
      else config.miner_onset_s = number_value(key, value);
    } else if (key == "seed") {
      long long s = 0;
      if (!parse_int64(value, s) || s < 0) throw UsageError("invalid value for seed: '" + std::string(value) + "'");
      config.seed = static_cast<std::uint64_t>(s);
    } else if (key.substr(0, 7) == "benign." && set_regime_key(config.benign, key.substr(7), value, key)) {
    } else if (key.substr(0, 6) == "miner." && set_regime_key(config.miner, key.substr(6), value, key)) {
    } else {
      throw UsageError("config line " + std::to_string(line_no) + ": unknown key '" + std::string(key) + "'");
    }
  }
}

std::string format_config(const ScenarioConfig& c) {
  std::ostringstream out;
  out << "scenario_id = " << c.scenario_id << "\n";
  out << "description = " << c.description << "\n";
  out << "duration_s = " << format_exact(c.duration_s) << "\n";
  out << "interval_s = " << format_exact(c.interval_s) << "\n";
  out << "onset_s = " << (c.miner_onset_s ? format_exact(*c.miner_onset_s) : "none") << "\n";
  out << "ramp_s = " << format_exact(c.ramp_s) << "\n";
  out << "seed = " << c.seed << "\n";
  for (const auto& [prefix, regime] : {std::pair{"benign", &c.benign}, std::pair{"miner", &c.miner}}) {
    out << prefix << ".kernel_name = " << regime->kernel_name << "\n";
    for (const auto& ch : kRegimeChannels) {
      const ChannelParams& p = (*regime).*ch.member;
      out << prefix << "." << ch.name << ".mean = " << format_exact(p.mean) << "\n";
      out << prefix << "." << ch.name << ".std = " << format_exact(p.std) << "\n";
      out << prefix << "." << ch.name << ".lo = " << format_exact(p.lo) << "\n";
      out << prefix << "." << ch.name << ".hi = " << format_exact(p.hi) << "\n";
    }
  }
  return out.str();
}

Trace simulate_trace(const ScenarioConfig& config) {
  validate_config(config);
  const std::size_t n = sample_count(config);
  if (n == 0) throw UsageError("empty scenario");

  Trace trace;
  trace.meta.scenario_id = config.scenario_id;
  trace.meta.seed = config.seed;
  trace.meta.interval_s = config.interval_s;
  trace.meta.description = config.description;
  trace.meta.rng = kRngAlgorithm;
  trace.meta.onset_s = config.miner_onset_s;
  trace.samples.reserve(n);
  trace.kernels.reserve(n);
  trace.labels.reserve(n);

  Rng rng(config.seed);
  std::array<double, kRegimeChannels.size()> v{};
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) * config.interval_s;
    const bool miner = config.miner_onset_s && t >= *config.miner_onset_s;
    const double w = miner ? ramp_weight(t, *config.miner_onset_s, config.ramp_s) : 0.0;
    const RegimeParams& bounds = miner ? config.miner : config.benign;
    for (std::size_t c = 0; c < kRegimeChannels.size(); ++c) {
      const auto member = kRegimeChannels[c].member;
      const ChannelParams& b = config.benign.*member;
      const ChannelParams& m = config.miner.*member;
      const ChannelParams& clip = bounds.*member;
      v[c] = channel_value(rng, lerp(b.mean, m.mean, w), lerp(b.std, m.std, w), clip.lo, clip.hi);
    }
    TelemetrySample s;
    s.t = t;
    s.fps = v[0];
    s.power = v[1];
    s.gpu_util = v[2];
    s.mem_used = v[3];
    s.sm_clock = v[4];
    s.temperature = v[5];
    trace.samples.push_back(s);
    trace.kernels.push_back(KernelRecord{t, miner ? config.miner.kernel_name : config.benign.kernel_name,
                                         v[6], v[7], v[8], v[4]});
    trace.labels.push_back(miner ? Label::miner : Label::benign);
  }
  return trace;
}

Trace inject_miner(const Trace& benign, double onset_s, const RegimeParams& miner, double ramp_s,
                   std::uint64_t seed) {
  validate_regime(miner, "miner");
  if (benign.samples.empty()) throw DataError("cannot inject into an empty trace");
  if (!(onset_s >= 0.0)) throw UsageError("onset must be >= 0");
  if (onset_s > benign.samples.back().t) throw UsageError("onset beyond trace end");
  if (!(ramp_s >= 0.0)) throw UsageError("ramp_s must be >= 0");

  Trace out = benign;
  out.meta.onset_s = onset_s;
  if (out.labels.size() != out.samples.size()) out.labels.assign(out.samples.size(), Label::benign);

  Rng rng(seed);
  const auto blend = [&](double original, const ChannelParams& p, double w) {
    const double draw = channel_value(rng, p.mean, p.std, p.lo, p.hi);
    return std::clamp(lerp(original, draw, w), p.lo, p.hi);
  };
  for (std::size_t i = 0; i < out.samples.size(); ++i) {
    TelemetrySample& s = out.samples[i];
    if (s.t < onset_s) continue;
    const double w = ramp_weight(s.t, onset_s, ramp_s);
    const double fps = blend(s.fps.value_or(0.0), miner.fps, w);
    if (s.fps) s.fps = fps;
    s.power = blend(s.power, miner.power, w);
    s.gpu_util = blend(s.gpu_util, miner.gpu_util, w);
    s.mem_used = blend(s.mem_used, miner.mem_used, w);
    s.sm_clock = blend(s.sm_clock, miner.sm_clock, w);
    s.temperature = blend(s.temperature, miner.temperature, w);
    out.labels[i] = Label::miner;
  }
  for (auto& k : out.kernels) {
    if (k.t < onset_s) continue;
    const double w = ramp_weight(k.t, onset_s, ramp_s);
    k.duration_us = blend(k.duration_us, miner.duration_us, w);
    k.sm_throughput = blend(k.sm_throughput, miner.sm_throughput, w);
    k.dram_throughput = blend(k.dram_throughput, miner.dram_throughput, w);
    k.sm_freq = blend(k.sm_freq, miner.sm_clock, w);
    k.kernel_name = miner.kernel_name;
  }
  return out;
}

std::vector<Trace> make_corpus(std::size_t n_benign, std::size_t n_mixed, const ScenarioConfig& base,
                               std::uint64_t seed, Exec exec) {
  const std::size_t total = n_benign + n_mixed;
  if (total == 0) throw UsageError("corpus needs at least one trace");
  validate_config(base);

  std::vector<ScenarioConfig> configs(total, base);
  for (std::size_t i = 0; i < total; ++i) {
    ScenarioConfig& c = configs[i];
    c.seed = derive_seed(seed, i);
    char id[32];
    if (i < n_benign) {
      std::snprintf(id, sizeof id, "benign_%03zu", i);
      c.miner_onset_s.reset();
    } else {
      std::snprintf(id, sizeof id, "mixed_%03zu", i - n_benign);
      if (!base.miner_onset_s) {
        Rng onset_rng(derive_seed(c.seed, 0));
        c.miner_onset_s = onset_rng.uniform(0.2 * base.duration_s, 0.8 * base.duration_s);
      }
    }
    c.scenario_id = id;
  }

  std::vector<Trace> corpus(total);
  const auto n = static_cast<long long>(total);
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(dynamic)
    for (long long i = 0; i < n; ++i) corpus[i] = simulate_trace(configs[i]);
  } else {
    for (long long i = 0; i < n; ++i) corpus[i] = simulate_trace(configs[i]);
  }
  return corpus;
}

}  // namespace gpusentinel
