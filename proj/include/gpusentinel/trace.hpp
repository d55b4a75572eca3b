#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace gpusentinel {

// One device-sampler reading. `t` is seconds since trace start.
struct TelemetrySample {
  double t = 0.0;
  double gpu_util = 0.0;     // percent
  double mem_used = 0.0;     // MiB
  double power = 0.0;        // W
  double sm_clock = 0.0;     // MHz
  double temperature = 0.0;  // deg C
  std::optional<double> fps;

  bool operator==(const TelemetrySample&) const = default;
};

// One kernel-profiler row.
struct KernelRecord {
  double t = 0.0;
  std::string kernel_name;
  double duration_us = 0.0;
  double sm_throughput = 0.0;    // percent of peak
  double dram_throughput = 0.0;  // percent of peak
  double sm_freq = 0.0;          // MHz

  bool operator==(const KernelRecord&) const = default;
};

enum class Label : std::uint8_t { benign = 0, miner = 1 };

struct TraceMeta {
  std::string scenario_id;
  std::uint64_t seed = 0;
  double interval_s = 1.0;
  std::string description;
  std::string rng;  // generator identifier, empty for ingested traces
  std::optional<double> onset_s;

  bool operator==(const TraceMeta&) const = default;
};

struct Trace {
  TraceMeta meta;
  std::vector<TelemetrySample> samples;
  std::vector<KernelRecord> kernels;
  std::vector<Label> labels;  // one per sample

  bool operator==(const Trace&) const = default;
};

// One entry per violated invariant; empty means the trace is valid.
std::vector<std::string> validate_trace(const Trace& trace);

// Inputs to align_streams carry absolute timestamps in epoch milliseconds;
// integer arithmetic keeps rebasing exact and translation-invariant.
struct AbsSample {
  std::int64_t abs_ms = 0;
  double gpu_util = 0.0;
  double mem_used = 0.0;
  double power = 0.0;
  double sm_clock = 0.0;
  double temperature = 0.0;
};

struct AbsKernel {
  std::int64_t abs_ms = 0;
  std::string kernel_name;
  double duration_us = 0.0;
  double sm_throughput = 0.0;
  double dram_throughput = 0.0;
  double sm_freq = 0.0;
};

struct FpsReading {
  std::int64_t abs_ms = 0;
  double fps = 0.0;
};

struct AlignOptions {
  double interval_s = 1.0;  // sampler interval; fps attaches within half of it
  std::optional<std::vector<Label>> labels;
};

// Rebases all streams to the earliest timestamp across them and attaches each
// fps reading to the nearest sample within half an interval. Throws DataError
// for an empty sampler stream or out-of-order input.
Trace align_streams(const std::vector<AbsSample>& samples, const std::vector<AbsKernel>& kernels,
                    const std::vector<FpsReading>& fps_log, const AlignOptions& options = {});

// Time of the first miner-labelled sample, if any.
std::optional<double> first_miner_time(const Trace& trace);

}  // namespace gpusentinel
