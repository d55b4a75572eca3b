#pragma once

#include <array>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gpusentinel/features.hpp"
#include "gpusentinel/trace.hpp"

namespace gpusentinel {

// Per-channel means of the benign and miner regimes, in kChannels order.
// A channel with no readings in a regime (fps on a log without a frame
// counter) has no mean and therefore no delta.
struct RegimeSummary {
  std::array<std::optional<double>, kChannels.size()> benign_mean{};
  std::array<std::optional<double>, kChannels.size()> miner_mean{};

  // 100 * (miner - benign) / benign; 0 when both means are 0.
  std::optional<double> delta_pct(std::size_t channel) const;
};

// Two-trace mode: every sample of `benign` against every sample of `miner`.
RegimeSummary summarize_regimes(const Trace& benign, const Trace& miner);
// Mixed mode: samples split by label and kernel records by the first miner
// sample time. Throws DataError when either regime is absent.
RegimeSummary summarize_mixed(const Trace& mixed);

// channel,benign_mean,miner_mean,delta_pct with percentages at 2 decimals.
std::string format_summary_csv(const RegimeSummary& summary);

struct ChartSeries {
  std::string name;
  std::string color;
  std::vector<std::pair<double, double>> points;  // (t seconds, value)
};

struct ChartSpec {
  std::string title;
  std::string y_label;  // includes the unit, e.g. "Power (W)"
  std::vector<ChartSeries> series;
  std::optional<double> onset_s;
};

// Self-contained 800x400 SVG line chart. Output depends only on the input.
std::string render_line_chart(const ChartSpec& chart);

// fps and power charts for a mixed trace (with onset marker) or for a
// benign/miner pair (two series each).
ChartSpec fps_chart(const Trace& mixed);
ChartSpec power_chart(const Trace& mixed);
ChartSpec fps_chart(const Trace& benign, const Trace& miner);
ChartSpec power_chart(const Trace& benign, const Trace& miner);

}  // namespace gpusentinel
