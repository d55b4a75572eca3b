#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gpusentinel/exec.hpp"
#include "gpusentinel/trace.hpp"

namespace gpusentinel {

// Gaussian draw clipped to [lo, hi].
struct ChannelParams {
  double mean = 0.0;
  double std = 0.0;
  double lo = 0.0;
  double hi = 0.0;

  bool operator==(const ChannelParams&) const = default;
};

struct RegimeParams {
  ChannelParams fps;
  ChannelParams power;
  ChannelParams gpu_util;
  ChannelParams mem_used;
  ChannelParams sm_clock;
  ChannelParams temperature;
  ChannelParams duration_us;
  ChannelParams sm_throughput;
  ChannelParams dram_throughput;
  std::string kernel_name;

  bool operator==(const RegimeParams&) const = default;
};

// Channel names in draw order, paired with member pointers.
struct RegimeChannel {
  std::string_view name;
  ChannelParams RegimeParams::*member;
};
extern const std::array<RegimeChannel, 9> kRegimeChannels;

// Throws UsageError naming the first bad channel.
void validate_regime(const RegimeParams& params, std::string_view which);

// YOLOv8-only operating point.
RegimeParams default_benign_params();
// YOLOv8 with the miner in the background.
RegimeParams default_miner_params();

struct ScenarioConfig {
  std::string scenario_id = "scenario";
  std::string description;
  double duration_s = 600.0;
  double interval_s = 1.0;
  std::optional<double> miner_onset_s;
  double ramp_s = 5.0;
  std::uint64_t seed = 42;
  RegimeParams benign = default_benign_params();
  RegimeParams miner = default_miner_params();
};

void validate_config(const ScenarioConfig& config);

// Flat `key = value` text; '#' starts a comment. Keys: scenario_id,
// description, duration_s, interval_s, onset_s (blank or "none" clears),
// ramp_s, seed, and <benign|miner>.<channel>.<mean|std|lo|hi>.
void apply_config_text(ScenarioConfig& config, std::string_view text);
std::string format_config(const ScenarioConfig& config);

// floor(duration/interval) samples, one kernel record per sample. Samples at
// or after the onset are labelled miner; over the ramp the mean and std move
// linearly from the benign to the miner regime and miner clip bounds apply.
Trace simulate_trace(const ScenarioConfig& config);

// Overwrites samples and kernels at/after `onset_s` with miner draws blended
// in over `ramp_s`; everything earlier is left untouched.
Trace inject_miner(const Trace& benign, double onset_s, const RegimeParams& miner, double ramp_s,
                   std::uint64_t seed);

// n_benign benign-only traces followed by n_mixed traces. Mixed onsets are
// uniform over [0.2, 0.8] of the duration unless the base config fixes one.
// Per-trace seeds are derived from `seed` before any work is scheduled.
std::vector<Trace> make_corpus(std::size_t n_benign, std::size_t n_mixed, const ScenarioConfig& base,
                               std::uint64_t seed, Exec exec = Exec::parallel);

}  // namespace gpusentinel
