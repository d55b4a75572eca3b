#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "gpusentinel/classifiers.hpp"
#include "gpusentinel/features.hpp"
#include "gpusentinel/ingest.hpp"
#include "gpusentinel/trace.hpp"

namespace gpusentinel {

enum class VerdictSource { model, rules };
std::string_view to_string(VerdictSource source);

struct DetectionVerdict {
  double window_start_t = 0.0;
  double window_end_t = 0.0;
  double score = 0.0;
  int label = 0;
  VerdictSource source = VerdictSource::model;

  bool operator==(const DetectionVerdict&) const = default;
};

struct AlertEvent {
  double t_raised = 0.0;  // end of the window that completed the run
  std::size_t consecutive_positives = 0;
  std::vector<DetectionVerdict> triggering;

  bool operator==(const AlertEvent&) const = default;
};

struct RuleThresholds {
  double min_gpu_util = 95.0;  // percent
  double min_power = 85.0;     // W
  double min_sustain_s = 60.0;
};

void validate_thresholds(const RuleThresholds& thresholds);
// "util,power,sustain"
RuleThresholds parse_thresholds(std::string_view text);

// Positive iff every sample meets both the utilisation and power floor; the
// score is the fraction of samples that do. The window span (last - first +
// one interval) must cover min_sustain_s.
DetectionVerdict rule_detect(std::span<const TelemetrySample> window, const RuleThresholds& thresholds,
                             double interval_s);

// Raises an alert on exactly the k-th consecutive positive verdict, then
// stays quiet until a negative verdict resets the run.
class AlertDebouncer {
 public:
  explicit AlertDebouncer(std::size_t k);
  std::optional<AlertEvent> push(const DetectionVerdict& verdict);

 private:
  std::size_t k_;
  std::size_t run_ = 0;
  std::deque<DetectionVerdict> recent_;
};

using WindowScorer = std::function<DetectionVerdict(const Window&)>;

// Throws UsageError when the model's features or recorded window spec do
// not match what the detector will produce.
void check_model_compatibility(const Model& model, const WindowSpec& spec);
WindowScorer model_scorer(const Model& model, double threshold = 0.5);
WindowScorer rules_scorer(const RuleThresholds& thresholds, double interval_s);

struct StreamItem {
  DetectionVerdict verdict;
  std::optional<AlertEvent> alert;
};

struct StreamOptions {
  WindowSpec spec;
  std::size_t debounce_k = 3;
  double interval_s = 1.0;
  // When set, a window also waits for the kernel stream to pass its end, or
  // for the sampler to run `kernel_lag_s` past it.
  bool expect_kernels = false;
  double kernel_lag_s = 10.0;
};

// Incremental sliding-window detector. Push time-ordered samples and kernel
// records, then poll() for verdicts of windows whose data is complete.
// Windows match windows()/featurize() exactly and are emitted once, in order.
class StreamDetector {
 public:
  StreamDetector(WindowScorer scorer, const StreamOptions& options);

  void push_sample(const TelemetrySample& sample);  // throws DataError if t does not increase
  void push_kernel(const KernelRecord& kernel);
  std::vector<StreamItem> poll();
  // End of stream: every complete window is emitted regardless of watermarks.
  std::vector<StreamItem> flush();

  std::size_t windows_emitted() const { return emitted_; }

 private:
  std::vector<StreamItem> drain(bool final);

  WindowScorer scorer_;
  StreamOptions opt_;
  AlertDebouncer debouncer_;
  std::vector<TelemetrySample> samples_;  // from the next window start onward
  std::vector<KernelRecord> kernels_;
  std::optional<double> last_sample_t_;
  std::optional<double> last_kernel_t_;
  std::size_t emitted_ = 0;
  std::size_t skip_ = 0;
};

// Replays a recorded trace through StreamDetector in time order.
std::vector<StreamItem> stream_detect(const Trace& trace, WindowScorer scorer, const WindowSpec& spec,
                                      std::size_t debounce_k);
std::vector<StreamItem> stream_detect(const Trace& trace, const Model& model, const WindowSpec& spec,
                                      std::size_t debounce_k);

// Online counterpart of align_streams for tailed logs. The time origin is the
// first sampler row; fps readings attach by the same nearest-within-half-an-
// interval rule once both streams have moved far enough to make it final.
class StreamAligner {
 public:
  using Event = std::variant<TelemetrySample, KernelRecord>;

  StreamAligner(double interval_s, bool expect_fps);

  void push_sampler(const RawSamplerRow& row);
  void push_kernel(const RawKernelRow& row);
  void push_fps(const RawFpsRow& row);
  std::vector<Event> drain();
  std::vector<Event> flush();

 private:
  std::vector<Event> release(bool final);
  double rebase(std::int64_t ms) const { return static_cast<double>(ms - *origin_) / 1000.0; }

  std::int64_t interval_ms_;
  std::int64_t half_ms_;
  bool expect_fps_;
  std::optional<std::int64_t> origin_;
  std::deque<RawSamplerRow> pending_samples_;
  std::deque<RawKernelRow> pending_kernels_;
  std::deque<RawFpsRow> pending_fps_;
  std::optional<std::int64_t> last_sampler_ms_;
  std::optional<std::int64_t> last_fps_ms_;
};

// Follows a growing text file. Only newline-terminated lines are returned;
// a partial trailing line waits for its newline. A shrinking file is treated
// as truncated and re-read from the start.
class FileTailer {
 public:
  explicit FileTailer(std::filesystem::path path);

  bool exists() const;
  // Waits up to `grace_s` for the file to appear.
  bool wait_for_file(double grace_s, double poll_interval_s) const;
  std::vector<std::string> poll();
  std::size_t lines_read() const { return line_no_; }

 private:
  std::filesystem::path path_;
  std::uintmax_t offset_ = 0;
  std::string partial_;
  std::size_t line_no_ = 0;
};

// Parsed rows from a tailed log; malformed lines become in-band errors.
template <typename Row>
struct TailItem {
  std::optional<Row> row;
  std::string error;
};

template <typename Row>
class RowTailer {
 public:
  using Parser = Row (*)(std::string_view, std::size_t);
  using HeaderCheck = bool (*)(std::string_view);

  RowTailer(std::filesystem::path path, Parser parser, HeaderCheck is_header)
      : tailer_(std::move(path)), parser_(parser), is_header_(is_header) {}

  FileTailer& file() { return tailer_; }

  std::vector<TailItem<Row>> poll() {
    std::vector<TailItem<Row>> out;
    for (const auto& line : tailer_.poll()) {
      ++line_no_;
      if (trim_blank(line)) continue;
      if (!seen_data_) {
        seen_data_ = true;
        if (is_header_ && is_header_(line)) continue;
      }
      try {
        out.push_back({parser_(line, line_no_), {}});
      } catch (const std::exception& e) {
        out.push_back({std::nullopt, e.what()});
      }
    }
    return out;
  }

 private:
  static bool trim_blank(const std::string& line) { return line.find_first_not_of(" \t\r") == std::string::npos; }
  FileTailer tailer_;
  Parser parser_;
  HeaderCheck is_header_;
  bool seen_data_ = false;
  std::size_t line_no_ = 0;
};

// Newline-delimited JSON alert record.
std::string format_alert(const AlertEvent& alert);

}  // namespace gpusentinel
