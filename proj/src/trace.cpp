#include "gpusentinel/trace.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "gpusentinel/error.hpp"

namespace gpusentinel {
namespace {

void check_range(std::vector<std::string>& out, const char* what, std::size_t index,
                 const char* field, double value, double lo, double hi) {
  if (std::isfinite(value) && value >= lo && value <= hi) return;
  std::ostringstream msg;
  msg << what << "[" << index << "]." << field << " = " << value << " outside [" << lo << ", "
      << hi << "]";
  out.push_back(msg.str());
}

template <typename T>
void check_order(const std::vector<T>& rows, const char* stream) {
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].abs_ms < rows[i - 1].abs_ms) {
      std::ostringstream msg;
      msg << stream << " stream out of order at index " << i << ": " << rows[i].abs_ms << " < "
          << rows[i - 1].abs_ms;
      throw DataError(msg.str());
    }
  }
}

}  // namespace

std::vector<std::string> validate_trace(const Trace& trace) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<std::string> out;
  const auto& s = trace.samples;
  for (std::size_t i = 0; i < s.size(); ++i) {
    check_range(out, "samples", i, "t", s[i].t, 0.0, inf);
    check_range(out, "samples", i, "gpu_util", s[i].gpu_util, 0.0, 100.0);
    check_range(out, "samples", i, "mem_used", s[i].mem_used, 0.0, inf);
    check_range(out, "samples", i, "power", s[i].power, 0.0, inf);
    check_range(out, "samples", i, "sm_clock", s[i].sm_clock, 0.0, inf);
    check_range(out, "samples", i, "temperature", s[i].temperature, -inf, inf);
    if (s[i].fps) check_range(out, "samples", i, "fps", *s[i].fps, 0.0, inf);
    if (i > 0 && !(s[i].t > s[i - 1].t)) {
      std::ostringstream msg;
      msg << "samples[" << i << "].t = " << s[i].t << " not after samples[" << i - 1
          << "].t = " << s[i - 1].t;
      out.push_back(msg.str());
    }
  }
  const auto& k = trace.kernels;
  for (std::size_t i = 0; i < k.size(); ++i) {
    check_range(out, "kernels", i, "t", k[i].t, 0.0, inf);
    if (!(k[i].duration_us > 0.0) || !std::isfinite(k[i].duration_us)) {
      std::ostringstream msg;
      msg << "kernels[" << i << "].duration_us = " << k[i].duration_us << " not positive";
      out.push_back(msg.str());
    }
    check_range(out, "kernels", i, "sm_throughput", k[i].sm_throughput, 0.0, 100.0);
    check_range(out, "kernels", i, "dram_throughput", k[i].dram_throughput, 0.0, 100.0);
    if (!(k[i].sm_freq > 0.0) || !std::isfinite(k[i].sm_freq)) {
      std::ostringstream msg;
      msg << "kernels[" << i << "].sm_freq = " << k[i].sm_freq << " not positive";
      out.push_back(msg.str());
    }
    if (i > 0 && k[i].t < k[i - 1].t) {
      std::ostringstream msg;
      msg << "kernels[" << i << "].t = " << k[i].t << " before kernels[" << i - 1
          << "].t = " << k[i - 1].t;
      out.push_back(msg.str());
    }
  }
  if (trace.labels.size() != s.size()) {
    std::ostringstream msg;
    msg << "labels length " << trace.labels.size() << " != samples length " << s.size();
    out.push_back(msg.str());
  }
  if (!(trace.meta.interval_s > 0.0)) out.push_back("meta.interval_s must be positive");
  return out;
}

Trace align_streams(const std::vector<AbsSample>& samples, const std::vector<AbsKernel>& kernels,
                    const std::vector<FpsReading>& fps_log, const AlignOptions& options) {
  if (samples.empty()) throw DataError("no samples");
  if (!(options.interval_s > 0.0)) throw UsageError("sampling interval must be positive");
  check_order(samples, "sampler");
  check_order(kernels, "kernel");
  check_order(fps_log, "fps");

  std::int64_t origin = samples.front().abs_ms;
  if (!kernels.empty()) origin = std::min(origin, kernels.front().abs_ms);
  if (!fps_log.empty()) origin = std::min(origin, fps_log.front().abs_ms);
  const auto rebase = [origin](std::int64_t ms) { return static_cast<double>(ms - origin) / 1000.0; };

  Trace trace;
  trace.meta.interval_s = options.interval_s;
  trace.samples.reserve(samples.size());
  for (const auto& a : samples) {
    TelemetrySample s;
    s.t = rebase(a.abs_ms);
    s.gpu_util = a.gpu_util;
    s.mem_used = a.mem_used;
    s.power = a.power;
    s.sm_clock = a.sm_clock;
    s.temperature = a.temperature;
    trace.samples.push_back(s);
  }
  trace.kernels.reserve(kernels.size());
  for (const auto& a : kernels) {
    trace.kernels.push_back(KernelRecord{rebase(a.abs_ms), a.kernel_name, a.duration_us,
                                         a.sm_throughput, a.dram_throughput, a.sm_freq});
  }

  // Nearest-neighbour attach on absolute times, so the result is independent
  // of the rebase origin. A later reading for the same sample wins.
  const double half_ms = options.interval_s * 500.0;
  for (const auto& r : fps_log) {
    auto it = std::lower_bound(samples.begin(), samples.end(), r.abs_ms,
                               [](const AbsSample& s, std::int64_t t) { return s.abs_ms < t; });
    std::size_t best = samples.size();
    std::int64_t best_dist = std::numeric_limits<std::int64_t>::max();
    if (it != samples.end()) {
      best = static_cast<std::size_t>(it - samples.begin());
      best_dist = it->abs_ms - r.abs_ms;
    }
    if (it != samples.begin()) {
      const auto prev = static_cast<std::size_t>(it - samples.begin()) - 1;
      const std::int64_t d = r.abs_ms - samples[prev].abs_ms;
      if (d <= best_dist) {  // equidistant goes to the earlier sample
        best = prev;
        best_dist = d;
      }
    }
    if (best < samples.size() && static_cast<double>(best_dist) <= half_ms) trace.samples[best].fps = r.fps;
  }

  if (options.labels) {
    if (options.labels->size() != samples.size()) {
      std::ostringstream msg;
      msg << samples.size() << " samples, " << options.labels->size() << " labels";
      throw DataError(msg.str());
    }
    trace.labels = *options.labels;
  } else {
    trace.labels.assign(samples.size(), Label::benign);
  }
  return trace;
}

std::optional<double> first_miner_time(const Trace& trace) {
  for (std::size_t i = 0; i < trace.labels.size() && i < trace.samples.size(); ++i) {
    if (trace.labels[i] == Label::miner) return trace.samples[i].t;
  }
  return std::nullopt;
}

}  // namespace gpusentinel
