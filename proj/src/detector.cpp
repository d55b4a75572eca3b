#include "gpusentinel/detector.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "gpusentinel/csv.hpp"
#include "gpusentinel/error.hpp"
#include "gpusentinel/numfmt.hpp"

namespace gpusentinel {

std::string_view to_string(VerdictSource source) { return source == VerdictSource::model ? "model" : "rules"; }

void validate_thresholds(const RuleThresholds& t) {
  if (!(t.min_gpu_util > 0.0) || !(t.min_power > 0.0) || !(t.min_sustain_s > 0.0))
    throw UsageError("rule thresholds must all be positive");
}

RuleThresholds parse_thresholds(std::string_view text) {
  const auto f = csv::split_line(text);
  if (f.size() != 3) throw UsageError("thresholds must be 'util,power,sustain'");
  RuleThresholds t;
  if (!parse_double(f[0], t.min_gpu_util) || !parse_double(f[1], t.min_power) || !parse_double(f[2], t.min_sustain_s))
    throw UsageError("thresholds must be numbers: '" + std::string(text) + "'");
  validate_thresholds(t);
  return t;
}

DetectionVerdict rule_detect(std::span<const TelemetrySample> window, const RuleThresholds& thresholds,
                             double interval_s) {
  validate_thresholds(thresholds);
  if (window.empty()) throw UsageError("rule window is empty");
  const double span = window.back().t - window.front().t + interval_s;
  if (span + 1e-9 < thresholds.min_sustain_s) {
    std::ostringstream msg;
    msg << "window covers " << span << " s, shorter than the " << thresholds.min_sustain_s << " s sustain period";
    throw UsageError(msg.str());
  }
  std::size_t hits = 0;
  for (const auto& s : window) hits += s.gpu_util >= thresholds.min_gpu_util && s.power >= thresholds.min_power;
  DetectionVerdict v;
  v.window_start_t = window.front().t;
  v.window_end_t = window.back().t + interval_s;
  v.score = static_cast<double>(hits) / static_cast<double>(window.size());
  v.label = hits == window.size() ? 1 : 0;
  v.source = VerdictSource::rules;
  return v;
}

AlertDebouncer::AlertDebouncer(std::size_t k) : k_(k) {
  if (k == 0) throw UsageError("debounce count must be >= 1");
}

std::optional<AlertEvent> AlertDebouncer::push(const DetectionVerdict& verdict) {
  if (verdict.label != 1) {
    run_ = 0;
    recent_.clear();
    return std::nullopt;
  }
  ++run_;
  if (run_ <= k_) recent_.push_back(verdict);
  if (run_ != k_) return std::nullopt;
  AlertEvent alert;
  alert.t_raised = verdict.window_end_t;
  alert.consecutive_positives = run_;
  alert.triggering.assign(recent_.begin(), recent_.end());
  return alert;
}

void check_model_compatibility(const Model& model, const WindowSpec& spec) {
  if (model.feature_names != feature_names())
    throw UsageError("model/spec feature mismatch: model features differ from the detector's feature set");
  if (model.meta.window && *model.meta.window != spec) {
    std::ostringstream msg;
    msg << "model/window mismatch: model trained with width " << model.meta.window->width << " stride "
        << model.meta.window->stride << ", detector uses width " << spec.width << " stride " << spec.stride;
    throw UsageError(msg.str());
  }
}

WindowScorer model_scorer(const Model& model, double threshold) {
  return [&model, threshold](const Window& w) {
    const FeatureVector fv = featurize(w);
    DetectionVerdict v;
    v.window_start_t = w.start_t;
    v.window_end_t = w.end_t;
    v.score = predict_score(model, fv.values);
    v.label = v.score >= threshold ? 1 : 0;
    v.source = VerdictSource::model;
    return v;
  };
}

WindowScorer rules_scorer(const RuleThresholds& thresholds, double interval_s) {
  validate_thresholds(thresholds);
  return [thresholds, interval_s](const Window& w) { return rule_detect(w.samples, thresholds, interval_s); };
}

StreamDetector::StreamDetector(WindowScorer scorer, const StreamOptions& options)
    : scorer_(std::move(scorer)), opt_(options), debouncer_(options.debounce_k) {
  validate_window_spec(opt_.spec);
  if (!(opt_.interval_s > 0.0)) throw UsageError("sampling interval must be positive");
}

void StreamDetector::push_sample(const TelemetrySample& sample) {
  if (last_sample_t_ && !(sample.t > *last_sample_t_)) {
    std::ostringstream msg;
    msg << "sample at t=" << sample.t << " does not follow t=" << *last_sample_t_;
    throw DataError(msg.str());
  }
  last_sample_t_ = sample.t;
  if (skip_ > 0) {
    --skip_;  // falls in the gap between windows when stride exceeds width
    return;
  }
  samples_.push_back(sample);
}

void StreamDetector::push_kernel(const KernelRecord& kernel) {
  if (last_kernel_t_ && kernel.t < *last_kernel_t_) {
    std::ostringstream msg;
    msg << "kernel at t=" << kernel.t << " precedes t=" << *last_kernel_t_;
    throw DataError(msg.str());
  }
  last_kernel_t_ = kernel.t;
  kernels_.push_back(kernel);
}

std::vector<StreamItem> StreamDetector::poll() { return drain(false); }

std::vector<StreamItem> StreamDetector::flush() { return drain(true); }

std::vector<StreamItem> StreamDetector::drain(bool final) {
  std::vector<StreamItem> out;
  const std::size_t width = opt_.spec.width;
  const std::size_t stride = opt_.spec.stride;
  const auto by_time = [](const KernelRecord& k, double t) { return k.t < t; };
  while (samples_.size() >= width) {
    const std::span<const TelemetrySample> ws(samples_.data(), width);
    const double start = ws.front().t;
    const double end = window_end_time(ws, opt_.interval_s);
    const bool samples_past = last_sample_t_ && *last_sample_t_ >= end;
    const bool kernels_past = !opt_.expect_kernels || (last_kernel_t_ && *last_kernel_t_ >= end);
    const bool lagged = last_sample_t_ && *last_sample_t_ >= end + opt_.kernel_lag_s;
    if (!final && !(samples_past && kernels_past) && !lagged) break;

    Window w;
    w.samples = ws;
    w.start_t = start;
    w.end_t = end;
    const auto kb = std::lower_bound(kernels_.begin(), kernels_.end(), start, by_time);
    const auto ke = std::lower_bound(kb, kernels_.end(), end, by_time);
    w.kernels = std::span<const KernelRecord>(&*kernels_.begin() + (kb - kernels_.begin()),
                                              static_cast<std::size_t>(ke - kb));
    StreamItem item;
    item.verdict = scorer_(w);
    item.alert = debouncer_.push(item.verdict);
    out.push_back(std::move(item));
    ++emitted_;

    if (stride >= samples_.size()) {
      skip_ = stride - samples_.size();
      samples_.clear();
    } else {
      samples_.erase(samples_.begin(), samples_.begin() + static_cast<std::ptrdiff_t>(stride));
    }
    if (!samples_.empty()) {
      const double front = samples_.front().t;
      kernels_.erase(kernels_.begin(), std::lower_bound(kernels_.begin(), kernels_.end(), front, by_time));
    }
  }
  return out;
}

std::vector<StreamItem> stream_detect(const Trace& trace, WindowScorer scorer, const WindowSpec& spec,
                                      std::size_t debounce_k) {
  StreamOptions opt;
  opt.spec = spec;
  opt.debounce_k = debounce_k;
  opt.interval_s = trace.meta.interval_s;
  opt.expect_kernels = !trace.kernels.empty();
  StreamDetector detector(std::move(scorer), opt);

  std::vector<StreamItem> out;
  const auto take = [&out](std::vector<StreamItem> items) {
    for (auto& i : items) out.push_back(std::move(i));
  };
  std::size_t si = 0, ki = 0;
  while (si < trace.samples.size() || ki < trace.kernels.size()) {
    if (ki < trace.kernels.size() && (si == trace.samples.size() || trace.kernels[ki].t < trace.samples[si].t)) {
      detector.push_kernel(trace.kernels[ki++]);
    } else {
      detector.push_sample(trace.samples[si++]);
    }
    take(detector.poll());
  }
  take(detector.flush());
  return out;
}

std::vector<StreamItem> stream_detect(const Trace& trace, const Model& model, const WindowSpec& spec,
                                      std::size_t debounce_k) {
  check_model_compatibility(model, spec);
  return stream_detect(trace, model_scorer(model), spec, debounce_k);
}

// ---- online alignment --------------------------------------------------

StreamAligner::StreamAligner(double interval_s, bool expect_fps)
    : interval_ms_(static_cast<std::int64_t>(std::llround(interval_s * 1000.0))),
      half_ms_(static_cast<std::int64_t>(std::floor(interval_s * 500.0))),
      expect_fps_(expect_fps) {
  if (!(interval_s > 0.0)) throw UsageError("sampling interval must be positive");
}

void StreamAligner::push_sampler(const RawSamplerRow& row) {
  if (last_sampler_ms_ && row.timestamp_ms <= *last_sampler_ms_)
    throw DataError("sampler row at " + format_timestamp(row.timestamp_ms) + " is out of order");
  if (!origin_) origin_ = row.timestamp_ms;
  last_sampler_ms_ = row.timestamp_ms;
  pending_samples_.push_back(row);
}

void StreamAligner::push_kernel(const RawKernelRow& row) {
  if (!pending_kernels_.empty() && row.timestamp_ms < pending_kernels_.back().timestamp_ms)
    throw DataError("kernel row at " + format_timestamp(row.timestamp_ms) + " is out of order");
  pending_kernels_.push_back(row);
}

void StreamAligner::push_fps(const RawFpsRow& row) {
  if (last_fps_ms_ && row.timestamp_ms < *last_fps_ms_)
    throw DataError("fps row at " + format_timestamp(row.timestamp_ms) + " is out of order");
  last_fps_ms_ = row.timestamp_ms;
  pending_fps_.push_back(row);
}

std::vector<StreamAligner::Event> StreamAligner::drain() { return release(false); }

std::vector<StreamAligner::Event> StreamAligner::flush() { return release(true); }

std::vector<StreamAligner::Event> StreamAligner::release(bool final) {
  std::vector<Event> out;
  if (!origin_) return out;
  const auto emit_kernels_before = [&](std::optional<std::int64_t> limit) {
    while (!pending_kernels_.empty() && (!limit || pending_kernels_.front().timestamp_ms < *limit)) {
      const auto& k = pending_kernels_.front();
      out.emplace_back(KernelRecord{rebase(k.timestamp_ms), k.kernel_name, k.duration_us, k.sm_throughput_pct,
                                    k.dram_throughput_pct, k.sm_freq_mhz});
      pending_kernels_.pop_front();
    }
  };

  while (!pending_samples_.empty()) {
    const RawSamplerRow s = pending_samples_.front();
    const std::optional<std::int64_t> next =
        pending_samples_.size() >= 2 ? std::optional(pending_samples_[1].timestamp_ms) : std::nullopt;
    const bool fps_final = !expect_fps_ || (last_fps_ms_ && *last_fps_ms_ >= s.timestamp_ms + half_ms_);
    const bool fps_stalled = *last_sampler_ms_ >= s.timestamp_ms + 10 * interval_ms_;
    if (!final && !(next && (fps_final || fps_stalled))) break;

    TelemetrySample out_s{rebase(s.timestamp_ms), s.gpu_util, s.mem_used, s.power, s.sm_clock, s.temperature, {}};
    while (!pending_fps_.empty() && pending_fps_.front().timestamp_ms <= s.timestamp_ms + half_ms_) {
      const auto r = pending_fps_.front();
      // Strictly nearer to the next sample: leave it for that one.
      if (next && (*next - r.timestamp_ms) < (r.timestamp_ms - s.timestamp_ms)) break;
      if (std::llabs(r.timestamp_ms - s.timestamp_ms) <= half_ms_) out_s.fps = r.fps;
      pending_fps_.pop_front();
    }
    emit_kernels_before(s.timestamp_ms);
    out.emplace_back(out_s);
    pending_samples_.pop_front();
  }
  if (final || pending_samples_.empty()) {
    emit_kernels_before(final ? std::nullopt
                              : std::optional<std::int64_t>(last_sampler_ms_ ? *last_sampler_ms_ + 1 : 0));
  } else {
    emit_kernels_before(pending_samples_.front().timestamp_ms);
  }
  if (final) pending_fps_.clear();
  return out;
}

// ---- file tailing -------------------------------------------------------

FileTailer::FileTailer(std::filesystem::path path) : path_(std::move(path)) {}

bool FileTailer::exists() const {
  std::error_code ec;
  return std::filesystem::is_regular_file(path_, ec);
}

bool FileTailer::wait_for_file(double grace_s, double poll_interval_s) const {
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::duration<double>(grace_s);
  while (!exists()) {
    if (std::chrono::steady_clock::now() >= deadline) return false;
    std::this_thread::sleep_for(std::chrono::duration<double>(std::max(poll_interval_s, 0.001)));
  }
  return true;
}

std::vector<std::string> FileTailer::poll() {
  std::vector<std::string> lines;
  std::error_code ec;
  const auto size = std::filesystem::file_size(path_, ec);
  if (ec) return lines;
  if (size < offset_) {
    offset_ = 0;
    partial_.clear();
  }
  if (size == offset_) return lines;

  std::ifstream in(path_, std::ios::binary);
  if (!in) return lines;
  in.seekg(static_cast<std::streamoff>(offset_));
  std::string chunk(static_cast<std::size_t>(size - offset_), '\0');
  in.read(chunk.data(), static_cast<std::streamsize>(chunk.size()));
  chunk.resize(static_cast<std::size_t>(in.gcount()));
  offset_ += chunk.size();
  partial_ += chunk;

  std::size_t pos = 0;
  while (true) {
    const auto nl = partial_.find('\n', pos);
    if (nl == std::string::npos) break;
    std::string line = partial_.substr(pos, nl - pos);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
    ++line_no_;
    pos = nl + 1;
  }
  partial_.erase(0, pos);
  return lines;
}

std::string format_alert(const AlertEvent& alert) {
  nlohmann::ordered_json j;
  const auto& last = alert.triggering.back();
  j["t_raised"] = alert.t_raised;
  j["score"] = last.score;
  j["source"] = std::string(to_string(last.source));
  j["window_start"] = last.window_start_t;
  j["window_end"] = last.window_end_t;
  j["consecutive_positives"] = alert.consecutive_positives;
  return j.dump();
}

}  // namespace gpusentinel
