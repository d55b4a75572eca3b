#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gpusentinel/exec.hpp"
#include "gpusentinel/trace.hpp"

namespace gpusentinel {

struct WindowSpec {
  std::size_t width = 30;   // samples per window, >= 2
  std::size_t stride = 10;  // samples between window starts, >= 1

  bool operator==(const WindowSpec&) const = default;
};

void validate_window_spec(const WindowSpec& spec);

// Canonical channel and statistic order. The feature index of
// (channel c, statistic s) is c * kStatistics.size() + s.
inline constexpr std::array<std::string_view, 8> kChannels = {
    "fps", "power", "gpu_util", "mem_used", "sm_clock", "duration_us", "sm_throughput", "dram_throughput"};
inline constexpr std::array<std::string_view, 5> kStatistics = {"mean", "std", "min", "max", "slope"};
inline constexpr std::size_t kFeatureCount = kChannels.size() * kStatistics.size();

std::size_t feature_index(std::string_view channel, std::string_view statistic);

// "fps_mean", "fps_std", ..., "dram_throughput_slope".
const std::vector<std::string>& feature_names();

struct FeatureVector {
  std::vector<double> values;
  double window_start_t = 0.0;
  double window_end_t = 0.0;
  std::optional<Label> label;
  bool degenerate = false;  // some channel had no data in the window

  bool operator==(const FeatureVector&) const = default;
};

// Mean, population std, min, max and least-squares slope against the
// position index 0..n-1. An empty input yields all zeros.
std::array<double, 5> channel_statistics(std::span<const double> values);

// Samples cover one window; kernel records are filtered to
// [start_t, end_t) here, so a superset may be passed. Throws UsageError on
// fewer than two samples.
FeatureVector extract_window_features(std::span<const TelemetrySample> samples,
                                      std::span<const KernelRecord> kernels, double start_t, double end_t);

struct Window {
  std::size_t first = 0;  // index of the first sample in the trace
  std::span<const TelemetrySample> samples;
  std::span<const KernelRecord> kernels;  // records with t in [start_t, end_t)
  double start_t = 0.0;
  double end_t = 0.0;  // last sample time plus one sampling interval
  Label label = Label::benign;
};

// Window ends are the last sample time plus one interval, so consecutive
// windows at stride == width tile the timeline.
double window_end_time(std::span<const TelemetrySample> samples, double interval_s);

// Full windows starting at 0, stride, 2*stride, ...; a window is labelled
// miner when at least half its samples are. Throws DataError when the trace
// is shorter than one window. The spans point into `trace`.
std::vector<Window> windows(const Trace& trace, const WindowSpec& spec);

FeatureVector featurize(const Window& window);

struct Scaler {
  std::vector<double> mean;
  std::vector<double> std;

  bool operator==(const Scaler&) const = default;
};

struct Dataset {
  std::vector<std::string> feature_names;
  std::vector<FeatureVector> rows;
  std::optional<Scaler> scaler;

  std::size_t dimension() const { return feature_names.size(); }
};

// Concatenates labelled windows of every trace in input order. Traces shorter
// than one window are skipped; throws DataError if nothing remains.
Dataset build_dataset(std::span<const Trace> traces, const WindowSpec& spec, Exec exec = Exec::parallel);

// Population mean/std per feature; needs at least two rows.
Dataset fit_standardizer(Dataset dataset);
Scaler compute_scaler(const Dataset& dataset);
// (x - mean) / std, with zero-variance features mapped to 0.
std::vector<double> apply_standardizer(const Scaler& scaler, std::span<const double> values);
std::vector<double> invert_standardizer(const Scaler& scaler, std::span<const double> standardized);

// Header = feature names + "label"; numbers in shortest exact notation.
std::string format_dataset_csv(const Dataset& dataset);
Dataset parse_dataset_csv(std::string_view text);

// FNV-1a over names, value bits and labels.
std::string dataset_fingerprint(const Dataset& dataset);

}  // namespace gpusentinel
