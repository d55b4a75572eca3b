#include "gpusentinel/features.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "gpusentinel/csv.hpp"
#include "gpusentinel/error.hpp"
#include "gpusentinel/numfmt.hpp"

namespace gpusentinel {

void validate_window_spec(const WindowSpec& spec) {
  if (spec.width < 2) throw UsageError("window width must be >= 2");
  if (spec.stride < 1) throw UsageError("window stride must be >= 1");
}

std::size_t feature_index(std::string_view channel, std::string_view statistic) {
  const auto c = std::find(kChannels.begin(), kChannels.end(), channel);
  const auto s = std::find(kStatistics.begin(), kStatistics.end(), statistic);
  if (c == kChannels.end() || s == kStatistics.end())
    throw UsageError("unknown feature " + std::string(channel) + "_" + std::string(statistic));
  return static_cast<std::size_t>(c - kChannels.begin()) * kStatistics.size() +
         static_cast<std::size_t>(s - kStatistics.begin());
}

const std::vector<std::string>& feature_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    out.reserve(kFeatureCount);
    for (auto c : kChannels)
      for (auto s : kStatistics) out.push_back(std::string(c) + "_" + std::string(s));
    return out;
  }();
  return names;
}

std::array<double, 5> channel_statistics(std::span<const double> x) {
  if (x.empty()) return {0.0, 0.0, 0.0, 0.0, 0.0};
  const auto n = static_cast<double>(x.size());
  double sum = 0.0;
  double lo = x[0], hi = x[0];
  for (double v : x) {
    sum += v;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const double mean = sum / n;
  const double index_mean = (n - 1.0) / 2.0;
  double ss = 0.0, sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - mean;
    const double di = static_cast<double>(i) - index_mean;
    ss += d * d;
    sxy += di * d;
    sxx += di * di;
  }
  const double slope = sxx > 0.0 ? sxy / sxx : 0.0;
  return {mean, std::sqrt(ss / n), lo, hi, slope};
}

FeatureVector extract_window_features(std::span<const TelemetrySample> samples,
                                      std::span<const KernelRecord> kernels, double start_t, double end_t) {
  if (samples.size() < 2) throw UsageError("window needs at least 2 samples");

  std::array<std::vector<double>, kChannels.size()> ch;
  for (auto& c : ch) c.reserve(samples.size());
  for (const auto& s : samples) {
    if (s.fps) ch[0].push_back(*s.fps);
    ch[1].push_back(s.power);
    ch[2].push_back(s.gpu_util);
    ch[3].push_back(s.mem_used);
    ch[4].push_back(s.sm_clock);
  }
  for (const auto& k : kernels) {
    if (k.t < start_t || k.t >= end_t) continue;
    ch[5].push_back(k.duration_us);
    ch[6].push_back(k.sm_throughput);
    ch[7].push_back(k.dram_throughput);
  }

  FeatureVector fv;
  fv.values.reserve(kFeatureCount);
  fv.window_start_t = start_t;
  fv.window_end_t = end_t;
  for (const auto& c : ch) {
    if (c.empty()) fv.degenerate = true;
    const auto st = channel_statistics(c);
    fv.values.insert(fv.values.end(), st.begin(), st.end());
  }
  return fv;
}

double window_end_time(std::span<const TelemetrySample> samples, double interval_s) {
  return samples.back().t + interval_s;
}

std::vector<Window> windows(const Trace& trace, const WindowSpec& spec) {
  validate_window_spec(spec);
  const std::size_t n = trace.samples.size();
  if (n < spec.width) {
    std::ostringstream msg;
    msg << "trace '" << trace.meta.scenario_id << "' has " << n << " samples, shorter than one window of "
        << spec.width;
    throw DataError(msg.str());
  }
  if (trace.labels.size() != n) throw DataError("labels length does not match samples");

  std::vector<Window> out;
  out.reserve((n - spec.width) / spec.stride + 1);
  const std::span<const TelemetrySample> all(trace.samples);
  const auto by_time = [](const KernelRecord& k, double t) { return k.t < t; };
  for (std::size_t first = 0; first + spec.width <= n; first += spec.stride) {
    Window w;
    w.first = first;
    w.samples = all.subspan(first, spec.width);
    w.start_t = w.samples.front().t;
    w.end_t = window_end_time(w.samples, trace.meta.interval_s);
    const auto kb = std::lower_bound(trace.kernels.begin(), trace.kernels.end(), w.start_t, by_time);
    const auto ke = std::lower_bound(kb, trace.kernels.end(), w.end_t, by_time);
    w.kernels = std::span<const KernelRecord>(trace.kernels).subspan(
        static_cast<std::size_t>(kb - trace.kernels.begin()), static_cast<std::size_t>(ke - kb));
    std::size_t positives = 0;
    for (std::size_t i = first; i < first + spec.width; ++i) positives += trace.labels[i] == Label::miner;
    w.label = 2 * positives >= spec.width ? Label::miner : Label::benign;
    out.push_back(w);
  }
  return out;
}

FeatureVector featurize(const Window& window) {
  FeatureVector fv = extract_window_features(window.samples, window.kernels, window.start_t, window.end_t);
  fv.label = window.label;
  return fv;
}

Dataset build_dataset(std::span<const Trace> traces, const WindowSpec& spec, Exec exec) {
  validate_window_spec(spec);
  if (traces.empty()) throw DataError("no traces to featurize");

  std::vector<Window> all;
  for (const auto& trace : traces) {
    if (trace.samples.size() < spec.width) continue;
    auto ws = windows(trace, spec);
    all.insert(all.end(), ws.begin(), ws.end());
  }
  if (all.empty()) throw DataError("every trace is shorter than one window");

  Dataset ds;
  ds.feature_names = feature_names();
  ds.rows.resize(all.size());
  const auto n = static_cast<long long>(all.size());
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < n; ++i) ds.rows[i] = featurize(all[i]);
  } else {
    for (long long i = 0; i < n; ++i) ds.rows[i] = featurize(all[i]);
  }
  return ds;
}

Scaler compute_scaler(const Dataset& dataset) {
  if (dataset.rows.size() < 2) throw DataError("standardizer needs at least 2 rows");
  const std::size_t d = dataset.dimension();
  const auto n = static_cast<double>(dataset.rows.size());
  Scaler sc;
  sc.mean.assign(d, 0.0);
  sc.std.assign(d, 0.0);
  for (const auto& r : dataset.rows) {
    if (r.values.size() != d) throw DataError("row length does not match feature names");
    for (std::size_t j = 0; j < d; ++j) sc.mean[j] += r.values[j];
  }
  for (auto& m : sc.mean) m /= n;
  for (const auto& r : dataset.rows)
    for (std::size_t j = 0; j < d; ++j) {
      const double diff = r.values[j] - sc.mean[j];
      sc.std[j] += diff * diff;
    }
  for (auto& s : sc.std) s = std::sqrt(s / n);
  return sc;
}

Dataset fit_standardizer(Dataset dataset) {
  dataset.scaler = compute_scaler(dataset);
  return dataset;
}

std::vector<double> apply_standardizer(const Scaler& scaler, std::span<const double> values) {
  if (values.size() != scaler.mean.size()) throw UsageError("standardizer dimension mismatch");
  std::vector<double> out(values.size());
  for (std::size_t j = 0; j < values.size(); ++j)
    out[j] = scaler.std[j] > 0.0 ? (values[j] - scaler.mean[j]) / scaler.std[j] : 0.0;
  return out;
}

std::vector<double> invert_standardizer(const Scaler& scaler, std::span<const double> z) {
  if (z.size() != scaler.mean.size()) throw UsageError("standardizer dimension mismatch");
  std::vector<double> out(z.size());
  for (std::size_t j = 0; j < z.size(); ++j) out[j] = z[j] * scaler.std[j] + scaler.mean[j];
  return out;
}

std::string format_dataset_csv(const Dataset& dataset) {
  std::string out;
  for (const auto& name : dataset.feature_names) out += csv::escape(name) + ",";
  out += "label\n";
  for (const auto& r : dataset.rows) {
    for (double v : r.values) out += format_exact(v) + ",";
    out += r.label ? (*r.label == Label::miner ? "1" : "0") : "";
    out += "\n";
  }
  return out;
}

Dataset parse_dataset_csv(std::string_view text) {
  const auto ls = csv::lines(text);
  std::size_t i = 0;
  while (i < ls.size() && trim(ls[i]).empty()) ++i;
  if (i == ls.size()) throw DataError("empty dataset file");
  auto header = csv::split_line(ls[i]);
  if (header.size() < 2 || header.back() != "label") throw DataError("dataset header must end with 'label'");
  header.pop_back();
  Dataset ds;
  ds.feature_names = header;
  for (++i; i < ls.size(); ++i) {
    if (trim(ls[i]).empty()) continue;
    const auto f = csv::split_line(ls[i]);
    if (f.size() != header.size() + 1) {
      std::ostringstream msg;
      msg << "expected " << header.size() + 1 << " columns, found " << f.size() << " at line " << i + 1;
      throw DataError(msg.str());
    }
    FeatureVector fv;
    fv.values.resize(header.size());
    for (std::size_t j = 0; j < header.size(); ++j)
      if (!parse_double(f[j], fv.values[j]))
        throw DataError("invalid " + header[j] + " '" + f[j] + "' at line " + std::to_string(i + 1));
    if (f.back() == "1") fv.label = Label::miner;
    else if (f.back() == "0") fv.label = Label::benign;
    else if (!f.back().empty()) throw DataError("invalid label '" + f.back() + "' at line " + std::to_string(i + 1));
    ds.rows.push_back(std::move(fv));
  }
  return ds;
}

std::string dataset_fingerprint(const Dataset& dataset) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const auto mix = [&h](std::uint64_t byte) {
    h ^= byte;
    h *= 0x100000001b3ULL;
  };
  const auto mix_u64 = [&](std::uint64_t v) {
    for (int b = 0; b < 8; ++b) mix((v >> (8 * b)) & 0xff);
  };
  for (const auto& name : dataset.feature_names) {
    for (unsigned char c : name) mix(c);
    mix(0);
  }
  for (const auto& r : dataset.rows) {
    for (double v : r.values) mix_u64(std::bit_cast<std::uint64_t>(v));
    mix(r.label ? static_cast<std::uint64_t>(*r.label) : 2);
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace gpusentinel
