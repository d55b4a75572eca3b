#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gpusentinel/trace.hpp"

namespace gpusentinel {

// Device-sampler query row:
//   YYYY/MM/DD HH:MM:SS.mmm, util, mem, power, clock, temp
struct RawSamplerRow {
  std::int64_t timestamp_ms = 0;  // epoch milliseconds, UTC
  double gpu_util = 0.0;
  double mem_used = 0.0;
  double power = 0.0;
  double sm_clock = 0.0;
  double temperature = 0.0;

  bool operator==(const RawSamplerRow&) const = default;
};

// Kernel-profiler export row:
//   kernel_name,timestamp,duration_us,sm_throughput_pct,dram_throughput_pct,sm_freq_mhz
struct RawKernelRow {
  std::string kernel_name;
  std::int64_t timestamp_ms = 0;
  double duration_us = 0.0;
  double sm_throughput_pct = 0.0;
  double dram_throughput_pct = 0.0;
  double sm_freq_mhz = 0.0;

  bool operator==(const RawKernelRow&) const = default;
};

struct RawFpsRow {
  std::int64_t timestamp_ms = 0;
  double fps = 0.0;

  bool operator==(const RawFpsRow&) const = default;
};

std::int64_t parse_timestamp(std::string_view text);  // throws DataError
std::string format_timestamp(std::int64_t epoch_ms);

// Parsers throw DataError with a 1-based line number. A header line is
// recognised only as the first non-empty line.
std::vector<RawSamplerRow> parse_sampler_csv(std::string_view text);
std::vector<RawKernelRow> parse_kernel_csv(std::string_view text);
std::vector<RawFpsRow> parse_fps_log(std::string_view text);
std::vector<Label> parse_labels(std::string_view text);

// Header recognisers applied to the first non-empty line.
bool is_sampler_header(std::string_view line);
bool is_kernel_header(std::string_view line);
bool is_fps_header(std::string_view line);

// Single-line parsers used by the file tailer; `line_no` only feeds messages.
RawSamplerRow parse_sampler_line(std::string_view line, std::size_t line_no);
RawKernelRow parse_kernel_line(std::string_view line, std::size_t line_no);
RawFpsRow parse_fps_line(std::string_view line, std::size_t line_no);

// Writers emit each column at its customary precision (power 2 decimals,
// throughputs 1 decimal, counters as integers) and fall back to the shortest
// exact form when a value has more digits, so parse(format(rows)) == rows.
// The kernel CSV starts with its column header, the other logs have none.
std::string format_sampler_csv(const std::vector<RawSamplerRow>& rows);
std::string format_kernel_csv(const std::vector<RawKernelRow>& rows);
std::string format_fps_log(const std::vector<RawFpsRow>& rows);
std::string format_sampler_line(const RawSamplerRow& row);
std::string format_kernel_line(const RawKernelRow& row);
std::string format_fps_line(const RawFpsRow& row);

AbsSample to_abs(const RawSamplerRow& row);
AbsKernel to_abs(const RawKernelRow& row);
FpsReading to_abs(const RawFpsRow& row);

// Renders a trace as the three raw logs, with t = 0 at `origin_ms` and
// values rounded to each column's customary precision.
struct RawLogs {
  std::vector<RawSamplerRow> sampler;
  std::vector<RawKernelRow> kernels;
  std::vector<RawFpsRow> fps;
};
RawLogs export_raw(const Trace& trace, std::int64_t origin_ms);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

struct LoadOptions {
  std::optional<std::filesystem::path> kernel_path;
  std::optional<std::filesystem::path> fps_path;
  std::optional<std::filesystem::path> labels_path;
  // Sampler interval; inferred as the median sampler spacing when absent.
  std::optional<double> interval_s;
};

Trace load_trace(const std::filesystem::path& sampler_path, const LoadOptions& options = {});

// Canonical trace file: "GPUSENTINEL-TRACE v1" then [meta], [samples],
// [kernels] and [labels] sections. Numbers use shortest exact notation.
inline constexpr std::string_view kTraceHeader = "GPUSENTINEL-TRACE v1";

std::string serialize_trace(const Trace& trace);
Trace deserialize_trace(std::string_view text);
void save_trace(const Trace& trace, const std::filesystem::path& path);
Trace load_canonical(const std::filesystem::path& path);

}  // namespace gpusentinel
