#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "gpusentinel/classifiers.hpp"
#include "gpusentinel/detector.hpp"
#include "gpusentinel/error.hpp"
#include "gpusentinel/features.hpp"
#include "gpusentinel/ingest.hpp"
#include "gpusentinel/numfmt.hpp"
#include "gpusentinel/report.hpp"
#include "gpusentinel/simulator.hpp"

namespace fs = std::filesystem;
using namespace gpusentinel;

namespace {

std::atomic<bool> g_stop{false};

extern "C" void on_signal(int) { g_stop = true; }

// Raw logs written by `simulate --raw` start at this wall-clock time.
constexpr std::int64_t kRawOrigin = 1700000000000;  // 2023/11/14 22:13:20.000

struct WindowFlags {
  std::size_t width = WindowSpec{}.width;
  std::size_t stride = WindowSpec{}.stride;

  WindowSpec spec() const {
    WindowSpec s{width, stride};
    validate_window_spec(s);
    return s;
  }
};

void add_window_flags(CLI::App* cmd, WindowFlags& w) {
  cmd->add_option("--window-width", w.width, "Samples per window");
  cmd->add_option("--window-stride", w.stride, "Samples between window starts");
}

void add_seed_flag(CLI::App* cmd, std::uint64_t& seed) {
  cmd->add_option("--seed", seed, "Seed for every randomized step")->envname("GPU_SENTINEL_SEED");
}

std::string pct(double fraction) { return format_fixed(100.0 * fraction, 2); }

// Directories contribute their *.trace files in name order.
std::vector<fs::path> expand_inputs(const std::vector<std::string>& inputs) {
  std::vector<fs::path> out;
  for (const auto& in : inputs) {
    const fs::path p(in);
    if (fs::is_directory(p)) {
      std::vector<fs::path> found;
      for (const auto& e : fs::directory_iterator(p))
        if (e.is_regular_file() && e.path().extension() == ".trace") found.push_back(e.path());
      std::sort(found.begin(), found.end());
      if (found.empty()) throw DataError("no .trace files in " + p.string());
      out.insert(out.end(), found.begin(), found.end());
    } else {
      out.push_back(p);
    }
  }
  return out;
}

std::vector<Trace> load_traces(const std::vector<std::string>& inputs) {
  std::vector<Trace> traces;
  for (const auto& p : expand_inputs(inputs)) traces.push_back(load_canonical(p));
  return traces;
}

bool is_dataset_input(const std::vector<std::string>& inputs) {
  return inputs.size() == 1 && fs::path(inputs[0]).extension() == ".csv";
}

Dataset load_dataset(const std::vector<std::string>& inputs, const WindowSpec& spec) {
  if (is_dataset_input(inputs)) return parse_dataset_csv(read_file(inputs[0]));
  const auto traces = load_traces(inputs);
  return build_dataset(traces, spec);
}

void print_metrics_table(std::ostream& os, const std::vector<std::pair<ModelKind, Metrics>>& rows) {
  char line[160];
  std::snprintf(line, sizeof line, "%-22s %10s %10s %10s %10s\n", "Model", "Accuracy", "Precision", "Recall", "F1");
  os << line;
  for (const auto& [kind, m] : rows) {
    std::snprintf(line, sizeof line, "%-22s %10s %10s %10s %10s\n", std::string(display_name(kind)).c_str(),
                  pct(m.accuracy).c_str(), pct(m.precision).c_str(), pct(m.recall).c_str(), pct(m.f1).c_str());
    os << line;
  }
}

std::string metrics_csv(const std::vector<std::pair<ModelKind, Metrics>>& rows) {
  std::string out = "model,accuracy,precision,recall,f1,tp,fp,tn,fn\n";
  for (const auto& [kind, m] : rows) {
    out += std::string(display_name(kind)) + "," + pct(m.accuracy) + "," + pct(m.precision) + "," + pct(m.recall) +
           "," + pct(m.f1) + "," + std::to_string(m.tp) + "," + std::to_string(m.fp) + "," + std::to_string(m.tn) +
           "," + std::to_string(m.fn) + "\n";
  }
  return out;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw UsageError("cannot create output directory " + dir.string());
}

// ---- simulate -------------------------------------------------------------

struct SimulateArgs {
  std::size_t benign = 0;
  std::size_t mixed = 1;
  std::uint64_t seed = 42;
  std::optional<double> onset;
  double duration = ScenarioConfig{}.duration_s;
  double interval = ScenarioConfig{}.interval_s;
  std::string config;
  std::string out = "traces";
  bool raw = false;
};

int cmd_simulate(const SimulateArgs& a) {
  ScenarioConfig base;
  base.duration_s = a.duration;
  base.interval_s = a.interval;
  if (!a.config.empty()) apply_config_text(base, read_file(a.config));
  if (a.onset) base.miner_onset_s = a.onset;
  validate_config(base);
  if (a.benign + a.mixed == 0) throw UsageError("nothing to simulate: --benign and --mixed are both 0");

  const fs::path dir(a.out);
  ensure_dir(dir);
  const auto corpus = make_corpus(a.benign, a.mixed, base, a.seed);
  std::printf("%-12s %10s %10s %12s %10s\n", "trace", "samples", "onset_s", "miner_share", "fps_delta");
  for (const auto& t : corpus) {
    const fs::path stem = dir / t.meta.scenario_id;
    save_trace(t, stem.string() + ".trace");
    if (a.raw) {
      const auto logs = export_raw(t, kRawOrigin);
      write_file(stem.string() + ".sampler.csv", format_sampler_csv(logs.sampler));
      write_file(stem.string() + ".kernel.csv", format_kernel_csv(logs.kernels));
      write_file(stem.string() + ".fps.log", format_fps_log(logs.fps));
      std::string labels;
      for (const auto l : t.labels) labels += l == Label::miner ? "1\n" : "0\n";
      write_file(stem.string() + ".labels", labels);
    }
    const auto miners = std::count(t.labels.begin(), t.labels.end(), Label::miner);
    const double share = t.labels.empty() ? 0.0 : static_cast<double>(miners) / static_cast<double>(t.labels.size());
    std::string delta = "-";
    if (miners > 0 && static_cast<std::size_t>(miners) < t.labels.size()) {
      if (const auto d = summarize_mixed(t).delta_pct(0)) delta = format_fixed(*d, 2) + "%";
    }
    std::printf("%-12s %10zu %10s %11s%% %10s\n", t.meta.scenario_id.c_str(), t.samples.size(),
                t.meta.onset_s ? format_fixed(*t.meta.onset_s, 2).c_str() : "-", pct(share).c_str(), delta.c_str());
  }
  return 0;
}

// ---- ingest ---------------------------------------------------------------

struct IngestArgs {
  std::string sampler;
  std::string kernel_log;
  std::string fps_log;
  std::string labels;
  std::optional<double> interval;
  std::string out;
};

int cmd_ingest(const IngestArgs& a) {
  LoadOptions opt;
  if (!a.kernel_log.empty()) opt.kernel_path = a.kernel_log;
  if (!a.fps_log.empty()) opt.fps_path = a.fps_log;
  if (!a.labels.empty()) opt.labels_path = a.labels;
  opt.interval_s = a.interval;
  const Trace t = load_trace(a.sampler, opt);
  save_trace(t, a.out);
  std::size_t with_fps = 0;
  for (const auto& s : t.samples) with_fps += s.fps.has_value();
  std::printf("%s: %zu samples, %zu kernel records, %zu with fps, interval %s s\n", a.out.c_str(), t.samples.size(),
              t.kernels.size(), with_fps, format_exact(t.meta.interval_s).c_str());
  return 0;
}

// ---- featurize ------------------------------------------------------------

struct FeaturizeArgs {
  std::vector<std::string> inputs;
  WindowFlags window;
  std::string out = "dataset.csv";
};

int cmd_featurize(const FeaturizeArgs& a) {
  const auto traces = load_traces(a.inputs);
  const Dataset ds = build_dataset(traces, a.window.spec());
  write_file(a.out, format_dataset_csv(ds));
  std::size_t miners = 0;
  for (const auto& r : ds.rows) miners += r.label == Label::miner;
  std::printf("%s: %zu windows (%zu miner, %zu benign), %zu features\n", a.out.c_str(), ds.rows.size(), miners,
              ds.rows.size() - miners, ds.dimension());
  return 0;
}

// ---- train / eval ---------------------------------------------------------

struct TrainArgs {
  std::vector<std::string> inputs;
  std::string model = "forest";
  double test_fraction = 0.3;
  std::uint64_t seed = 42;
  WindowFlags window;
  std::vector<std::string> hyper;
  std::string out = "models";
  std::string metrics_csv;
};

Hyperparams parse_hyper(const std::vector<std::string>& settings) {
  Hyperparams h;
  for (const auto& s : settings) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + s + "'");
    set_hyperparameter(h, trim(std::string_view(s).substr(0, eq)), trim(std::string_view(s).substr(eq + 1)));
  }
  return h;
}

int cmd_train(const TrainArgs& a) {
  if (!(a.test_fraction > 0.0 && a.test_fraction < 1.0)) throw UsageError("--test-fraction must be in (0, 1)");
  const Hyperparams hyper = parse_hyper(a.hyper);
  const WindowSpec spec = a.window.spec();
  std::vector<ModelKind> kinds;
  if (a.model == "all")
    kinds = {ModelKind::forest, ModelKind::gbm, ModelKind::logreg, ModelKind::mlp};
  else
    kinds = {parse_model_kind(a.model)};

  const bool from_traces = !is_dataset_input(a.inputs);
  const Dataset ds = load_dataset(a.inputs, spec);
  const auto [train, test] = split(ds, a.test_fraction, a.seed);

  const fs::path out(a.out);
  if (kinds.size() > 1) ensure_dir(out);
  std::vector<std::pair<ModelKind, Metrics>> rows;
  for (const auto kind : kinds) {
    Model m = train_model(kind, train, hyper, a.seed);
    if (from_traces) m.meta.window = spec;
    const fs::path path = kinds.size() > 1 ? out / (std::string(to_string(kind)) + ".model") : out;
    save_model(m, path);
    rows.emplace_back(kind, evaluate(m, test));
  }
  std::printf("train %zu windows, test %zu windows, seed %llu\n", train.rows.size(), test.rows.size(),
              static_cast<unsigned long long>(a.seed));
  print_metrics_table(std::cout, rows);
  if (!a.metrics_csv.empty()) write_file(a.metrics_csv, metrics_csv(rows));
  return 0;
}

struct EvalArgs {
  std::string model_file;
  std::vector<std::string> inputs;
  WindowFlags window;
  bool window_given = false;
  std::string metrics_csv;
};

int cmd_eval(const EvalArgs& a) {
  const Model m = load_model(a.model_file);
  WindowSpec spec = a.window.spec();
  if (!a.window_given && m.meta.window) spec = *m.meta.window;
  if (!is_dataset_input(a.inputs)) check_model_compatibility(m, spec);
  const Dataset ds = load_dataset(a.inputs, spec);
  const std::vector<std::pair<ModelKind, Metrics>> rows = {{m.kind, evaluate(m, ds)}};
  std::printf("evaluated %zu windows\n", ds.rows.size());
  print_metrics_table(std::cout, rows);
  if (!a.metrics_csv.empty()) write_file(a.metrics_csv, metrics_csv(rows));
  return 0;
}

// ---- detect ---------------------------------------------------------------

struct DetectArgs {
  std::string model_file;
  bool rules = false;
  std::string thresholds = "95,85,60";
  std::string trace;
  WindowFlags window;
  bool window_given = false;
  std::size_t debounce = 3;
  std::string out;
  bool verdicts = false;
  bool follow = false;
  std::string kernel_log;
  std::string fps_log;
  double interval = 1.0;
  double poll_interval = 0.5;
  double grace = 10.0;
  double idle_timeout = 0.0;
};

class AlertSink {
 public:
  explicit AlertSink(const std::string& path) {
    if (!path.empty()) {
      file_.open(path, std::ios::binary | std::ios::trunc);
      if (!file_) throw UsageError("cannot write " + path);
    }
  }
  void write(const std::string& line) {
    std::ostream& os = file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout;
    os << line << '\n';
    os.flush();
  }

 private:
  std::ofstream file_;
};

std::string format_verdict(const DetectionVerdict& v) {
  return "verdict " + format_exact(v.window_start_t) + " " + format_exact(v.window_end_t) + " " +
         format_exact(v.score) + " " + std::to_string(v.label);
}

struct Detection {
  WindowScorer scorer;
  WindowSpec spec;
  std::optional<Model> model;
};

// The rules baseline covers its sustain period by default, so without an
// explicit --window-width the width becomes ceil(sustain / interval).
Detection make_detection(const DetectArgs& a, double interval_s) {
  Detection d;
  d.spec = a.window.spec();
  if (a.rules == !a.model_file.empty()) throw UsageError("pass exactly one of --model-file or --rules");
  if (a.rules) {
    const RuleThresholds thr = parse_thresholds(a.thresholds);
    if (!a.window_given)
      d.spec.width = std::max<std::size_t>(2, static_cast<std::size_t>(std::ceil(thr.min_sustain_s / interval_s - 1e-9)));
    d.scorer = rules_scorer(thr, interval_s);
  } else {
    d.model = load_model(a.model_file);
    if (!a.window_given && d.model->meta.window) d.spec = *d.model->meta.window;
    check_model_compatibility(*d.model, d.spec);
  }
  return d;
}

int detect_batch(const DetectArgs& a) {
  const Trace t = load_canonical(a.trace);
  Detection d = make_detection(a, t.meta.interval_s);
  if (d.model) d.scorer = model_scorer(*d.model);
  AlertSink sink(a.out);
  std::size_t alerts = 0;
  const auto items = stream_detect(t, d.scorer, d.spec, a.debounce);
  for (const auto& item : items) {
    if (a.verdicts) std::cerr << format_verdict(item.verdict) << '\n';
    if (item.alert) {
      sink.write(format_alert(*item.alert));
      ++alerts;
    }
  }
  std::cerr << items.size() << " windows, " << alerts << " alerts\n";
  return 0;
}

int detect_follow(const DetectArgs& a) {
  Detection d = make_detection(a, a.interval);
  if (d.model) d.scorer = model_scorer(*d.model);
  RowTailer<RawSamplerRow> sampler(a.trace, parse_sampler_line, is_sampler_header);
  if (!sampler.file().wait_for_file(a.grace, a.poll_interval))
    throw DataError("sampler log " + a.trace + " did not appear within " + format_exact(a.grace) + " s");
  std::optional<RowTailer<RawKernelRow>> kernels;
  std::optional<RowTailer<RawFpsRow>> fps;
  if (!a.kernel_log.empty()) kernels.emplace(a.kernel_log, parse_kernel_line, is_kernel_header);
  if (!a.fps_log.empty()) fps.emplace(a.fps_log, parse_fps_line, is_fps_header);

  StreamOptions opt;
  opt.spec = d.spec;
  opt.debounce_k = a.debounce;
  opt.interval_s = a.interval;
  opt.expect_kernels = kernels.has_value();
  StreamDetector detector(d.scorer, opt);
  StreamAligner aligner(a.interval, fps.has_value());
  AlertSink sink(a.out);

  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);

  std::size_t alerts = 0;
  const auto report = [&](const std::string& log, const std::string& error) {
    std::cerr << "skipping malformed row in " << log << ": " << error << '\n';
  };
  const auto feed = [&](std::vector<StreamAligner::Event> events, std::vector<StreamItem> (StreamDetector::*finish)()) {
    for (const auto& e : events) {
      if (const auto* s = std::get_if<TelemetrySample>(&e))
        detector.push_sample(*s);
      else
        detector.push_kernel(std::get<KernelRecord>(e));
    }
    for (const auto& item : (detector.*finish)()) {
      if (a.verdicts) std::cerr << format_verdict(item.verdict) << '\n';
      if (item.alert) {
        sink.write(format_alert(*item.alert));
        ++alerts;
      }
    }
  };

  auto last_activity = std::chrono::steady_clock::now();
  while (!g_stop) {
    bool activity = false;
    // Out-of-order rows are reported and skipped so a daemon survives a
    // garbled line; the stream state is unchanged by a rejected row.
    const auto push = [&](auto&& push_fn, auto& items, const std::string& log) {
      for (auto& item : items) {
        activity = true;
        if (!item.row) {
          report(log, item.error);
          continue;
        }
        try {
          push_fn(*item.row);
        } catch (const DataError& e) {
          report(log, e.what());
        }
      }
    };
    auto s_items = sampler.poll();
    push([&](const RawSamplerRow& r) { aligner.push_sampler(r); }, s_items, a.trace);
    if (kernels) {
      auto k_items = kernels->poll();
      push([&](const RawKernelRow& r) { aligner.push_kernel(r); }, k_items, a.kernel_log);
    }
    if (fps) {
      auto f_items = fps->poll();
      push([&](const RawFpsRow& r) { aligner.push_fps(r); }, f_items, a.fps_log);
    }
    feed(aligner.drain(), &StreamDetector::poll);
    const auto now = std::chrono::steady_clock::now();
    if (activity) last_activity = now;
    if (a.idle_timeout > 0 && std::chrono::duration<double>(now - last_activity).count() >= a.idle_timeout) break;
    std::this_thread::sleep_for(std::chrono::duration<double>(a.poll_interval));
  }
  feed(aligner.flush(), &StreamDetector::flush);
  std::cerr << detector.windows_emitted() << " windows, " << alerts << " alerts\n";
  return 0;
}

// ---- report ---------------------------------------------------------------

struct ReportArgs {
  std::vector<std::string> traces;
  std::string out = "report";
};

int cmd_report(const ReportArgs& a) {
  if (a.traces.empty() || a.traces.size() > 2) throw UsageError("report takes one mixed trace or a benign and a miner trace");
  RegimeSummary summary;
  ChartSpec fps, power;
  if (a.traces.size() == 1) {
    const Trace t = load_canonical(a.traces[0]);
    summary = summarize_mixed(t);
    fps = fps_chart(t);
    power = power_chart(t);
  } else {
    const Trace b = load_canonical(a.traces[0]);
    const Trace m = load_canonical(a.traces[1]);
    summary = summarize_regimes(b, m);
    fps = fps_chart(b, m);
    power = power_chart(b, m);
  }
  const fs::path dir(a.out);
  ensure_dir(dir);
  const std::string csv = format_summary_csv(summary);
  write_file(dir / "summary.csv", csv);
  write_file(dir / "fps.svg", render_line_chart(fps));
  write_file(dir / "power.svg", render_line_chart(power));
  std::cout << csv;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GPU telemetry cryptominer detector"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "Generate seeded synthetic traces");
  c_sim->add_option("--benign", sim.benign, "Number of benign-only traces");
  c_sim->add_option("--mixed", sim.mixed, "Number of traces with a miner onset");
  add_seed_flag(c_sim, sim.seed);
  c_sim->add_option("--onset", sim.onset, "Miner onset in seconds; unset draws it from [0.2, 0.8] of the duration");
  c_sim->add_option("--duration", sim.duration, "Trace duration in seconds");
  c_sim->add_option("--interval", sim.interval, "Sampling interval in seconds");
  c_sim->add_option("--config", sim.config, "Scenario file of key = value overrides; none by default")->check(CLI::ExistingFile);
  c_sim->add_option("--out", sim.out, "Output directory");
  c_sim->add_flag("--raw", sim.raw, "Also write sampler, kernel, fps and label logs");

  IngestArgs ing;
  auto* c_ing = app.add_subcommand("ingest", "Align raw logs into a canonical trace");
  c_ing->add_option("sampler", ing.sampler, "Device sampler CSV")->required();
  c_ing->add_option("--kernel-log", ing.kernel_log, "Kernel profiler CSV; none by default");
  c_ing->add_option("--fps-log", ing.fps_log, "Frame-rate log; none by default");
  c_ing->add_option("--labels", ing.labels, "Label file, one 0/1 per sample; all benign when unset");
  c_ing->add_option("--interval", ing.interval, "Sampling interval in seconds (median spacing when unset)");
  c_ing->add_option("--out", ing.out, "Output trace file")->required();

  FeaturizeArgs feat;
  auto* c_feat = app.add_subcommand("featurize", "Extract windowed feature vectors");
  c_feat->add_option("inputs", feat.inputs, "Trace files or directories")->required();
  add_window_flags(c_feat, feat.window);
  c_feat->add_option("--out", feat.out, "Output dataset CSV");

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train", "Train classifiers on a stratified split and report test metrics");
  c_train->add_option("inputs", tr.inputs, "Trace files, directories, or one dataset CSV")->required();
  c_train->add_option("--model", tr.model, "logreg|tree|forest|gbm|mlp|all");
  c_train->add_option("--test-fraction", tr.test_fraction, "Share of windows held out for testing");
  add_seed_flag(c_train, tr.seed);
  add_window_flags(c_train, tr.window);
  c_train->add_option("--set", tr.hyper, "Hyperparameter override such as forest.tree_count=100, repeatable; none by default");
  c_train->add_option("--out", tr.out, "Model file, or a directory with --model all");
  c_train->add_option("--metrics-csv", tr.metrics_csv, "Also write the metrics table as CSV; skipped when unset");

  EvalArgs ev;
  auto* c_eval = app.add_subcommand("eval", "Score a saved model on traces or a dataset");
  c_eval->add_option("--model-file", ev.model_file, "Saved model")->required();
  c_eval->add_option("inputs", ev.inputs, "Trace files, directories, or one dataset CSV")->required();
  add_window_flags(c_eval, ev.window);
  c_eval->add_option("--metrics-csv", ev.metrics_csv, "Also write the metrics table as CSV; skipped when unset");

  DetectArgs det;
  auto* c_det = app.add_subcommand("detect", "Replay a trace or follow live logs and emit alerts");
  c_det->add_option("trace", det.trace, "Canonical trace, or the sampler log with --follow")->required();
  c_det->add_option("--model-file", det.model_file, "Saved model; required unless --rules");
  c_det->add_flag("--rules", det.rules, "Use the threshold rules instead of a model");
  c_det->add_option("--thresholds", det.thresholds, "Rule thresholds util,power,sustain");
  add_window_flags(c_det, det.window);
  c_det->add_option("--debounce", det.debounce, "Consecutive positive windows before an alert");
  c_det->add_option("--out", det.out, "Alert file; standard output when unset");
  c_det->add_flag("--verdicts", det.verdicts, "Print every window verdict to standard error");
  c_det->add_flag("--follow", det.follow, "Tail growing logs until interrupted");
  c_det->add_option("--kernel-log", det.kernel_log, "Kernel profiler CSV to tail with --follow; none by default");
  c_det->add_option("--fps-log", det.fps_log, "Frame-rate log to tail with --follow; none by default");
  c_det->add_option("--interval", det.interval, "Sampling interval in seconds for --follow");
  c_det->add_option("--poll-interval", det.poll_interval, "Seconds between file polls");
  c_det->add_option("--grace", det.grace, "Seconds to wait for the sampler log to appear");
  c_det->add_option("--idle-timeout", det.idle_timeout, "Stop after this many idle seconds (0 waits forever)");

  ReportArgs rep;
  auto* c_rep = app.add_subcommand("report", "Regime means, deltas and fps/power charts");
  c_rep->add_option("traces", rep.traces, "One mixed trace, or a benign and a miner trace")->required();
  c_rep->add_option("--out", rep.out, "Output directory for summary.csv, fps.svg and power.svg");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (c_sim->parsed()) return cmd_simulate(sim);
    if (c_ing->parsed()) return cmd_ingest(ing);
    if (c_feat->parsed()) return cmd_featurize(feat);
    if (c_train->parsed()) return cmd_train(tr);
    if (c_eval->parsed()) {
      ev.window_given = c_eval->count("--window-width") + c_eval->count("--window-stride") > 0;
      return cmd_eval(ev);
    }
    if (c_det->parsed()) {
      det.window_given = c_det->count("--window-width") + c_det->count("--window-stride") > 0;
      return det.follow ? detect_follow(det) : detect_batch(det);
    }
    if (c_rep->parsed()) return cmd_report(rep);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 3;
  }
  return 3;
}
