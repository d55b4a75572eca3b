#include "gpusentinel/report.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "gpusentinel/csv.hpp"
#include "gpusentinel/error.hpp"
#include "gpusentinel/numfmt.hpp"

namespace gpusentinel {

namespace {

constexpr int kWidth = 800;
constexpr int kHeight = 400;
constexpr double kLeft = 70, kRight = 20, kTop = 40, kBottom = 50;

struct Accum {
  std::array<double, kChannels.size()> sum{};
  std::array<std::size_t, kChannels.size()> count{};

  void add(std::size_t c, double v) {
    sum[c] += v;
    ++count[c];
  }
  void add(const TelemetrySample& s) {
    if (s.fps) add(0, *s.fps);
    add(1, s.power);
    add(2, s.gpu_util);
    add(3, s.mem_used);
    add(4, s.sm_clock);
  }
  void add(const KernelRecord& k) {
    add(5, k.duration_us);
    add(6, k.sm_throughput);
    add(7, k.dram_throughput);
  }
  std::array<std::optional<double>, kChannels.size()> means() const {
    std::array<std::optional<double>, kChannels.size()> m{};
    for (std::size_t c = 0; c < m.size(); ++c)
      if (count[c] > 0) m[c] = sum[c] / static_cast<double>(count[c]);
    return m;
  }
};

std::array<std::optional<double>, kChannels.size()> trace_means(const Trace& t) {
  Accum a;
  for (const auto& s : t.samples) a.add(s);
  for (const auto& k : t.kernels) a.add(k);
  return a.means();
}

// Nice tick step covering `range` in roughly `target` intervals.
double tick_step(double range, int target) {
  const double raw = range / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0, 10.0})
    if (raw <= m * mag) return m * mag;
  return 10.0 * mag;
}

std::string num(double v) { return format_fixed(v, 1); }

std::string escape_xml(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

ChartSeries series_of(const Trace& t, std::string name, std::string color, bool fps) {
  ChartSeries s{std::move(name), std::move(color), {}};
  for (const auto& x : t.samples) {
    if (fps && !x.fps) continue;
    s.points.emplace_back(x.t, fps ? *x.fps : x.power);
  }
  return s;
}

}  // namespace

std::optional<double> RegimeSummary::delta_pct(std::size_t channel) const {
  const auto& b = benign_mean.at(channel);
  const auto& m = miner_mean.at(channel);
  if (!b || !m) return std::nullopt;
  if (*b == 0.0) return *m == 0.0 ? std::optional(0.0) : std::nullopt;
  return 100.0 * (*m - *b) / *b;
}

RegimeSummary summarize_regimes(const Trace& benign, const Trace& miner) {
  if (benign.samples.empty() || miner.samples.empty()) throw DataError("missing regimes: a trace has no samples");
  return {trace_means(benign), trace_means(miner)};
}

RegimeSummary summarize_mixed(const Trace& mixed) {
  if (mixed.labels.size() != mixed.samples.size()) throw DataError("mixed trace needs one label per sample");
  const auto onset = first_miner_time(mixed);
  const bool has_benign = std::count(mixed.labels.begin(), mixed.labels.end(), Label::benign) > 0;
  if (!onset || !has_benign)
    throw DataError(std::string("missing regimes: trace has no ") + (onset ? "benign" : "miner") + " samples");
  Accum b, m;
  for (std::size_t i = 0; i < mixed.samples.size(); ++i)
    (mixed.labels[i] == Label::miner ? m : b).add(mixed.samples[i]);
  for (const auto& k : mixed.kernels) (k.t >= *onset ? m : b).add(k);
  return {b.means(), m.means()};
}

std::string format_summary_csv(const RegimeSummary& summary) {
  std::string out = "channel,benign_mean,miner_mean,delta_pct\n";
  const auto opt = [](const std::optional<double>& v, int dec) { return v ? format_fixed(*v, dec) : std::string(); };
  for (std::size_t c = 0; c < kChannels.size(); ++c) {
    out += std::string(kChannels[c]) + "," + opt(summary.benign_mean[c], 4) + "," + opt(summary.miner_mean[c], 4) +
           "," + opt(summary.delta_pct(c), 2) + "\n";
  }
  return out;
}

std::string render_line_chart(const ChartSpec& chart) {
  double t_lo = 0, t_hi = 1, v_lo = 0, v_hi = 1;
  bool any = false;
  for (const auto& s : chart.series)
    for (const auto& [t, v] : s.points) {
      if (!any) {
        t_lo = t_hi = t;
        v_lo = v_hi = v;
        any = true;
      }
      t_lo = std::min(t_lo, t);
      t_hi = std::max(t_hi, t);
      v_lo = std::min(v_lo, v);
      v_hi = std::max(v_hi, v);
    }
  if (chart.onset_s) {
    t_lo = std::min(t_lo, *chart.onset_s);
    t_hi = std::max(t_hi, *chart.onset_s);
  }
  // Values start from zero so the regime gap reads at true proportion.
  v_lo = std::min(v_lo, 0.0);
  if (t_hi <= t_lo) t_hi = t_lo + 1;
  if (v_hi <= v_lo) v_hi = v_lo + 1;
  const double vstep = tick_step(v_hi - v_lo, 5);
  v_hi = std::ceil(v_hi / vstep) * vstep;
  const double tstep = tick_step(t_hi - t_lo, 6);

  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  const auto x = [&](double t) { return kLeft + (t - t_lo) / (t_hi - t_lo) * pw; };
  const auto y = [&](double v) { return kTop + ph - (v - v_lo) / (v_hi - v_lo) * ph; };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
    << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"" << kWidth << "\" height=\"" << kHeight << "\" fill=\"white\"/>\n";
  o << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape_xml(chart.title)
    << "</text>\n";

  for (double v = v_lo; v <= v_hi + vstep * 1e-9; v += vstep) {
    o << "<line x1=\"" << num(kLeft) << "\" y1=\"" << num(y(v)) << "\" x2=\"" << num(kLeft + pw) << "\" y2=\""
      << num(y(v)) << "\" stroke=\"#e0e0e0\"/>\n";
    o << "<text x=\"" << num(kLeft - 6) << "\" y=\"" << num(y(v) + 4) << "\" text-anchor=\"end\">"
      << format_exact(std::round(v * 1e6) / 1e6) << "</text>\n";
  }
  for (double t = std::ceil(t_lo / tstep) * tstep; t <= t_hi + tstep * 1e-9; t += tstep) {
    o << "<text x=\"" << num(x(t)) << "\" y=\"" << num(kTop + ph + 18) << "\" text-anchor=\"middle\">"
      << format_exact(std::round(t * 1e6) / 1e6) << "</text>\n";
  }
  o << "<line x1=\"" << num(kLeft) << "\" y1=\"" << num(kTop + ph) << "\" x2=\"" << num(kLeft + pw) << "\" y2=\""
    << num(kTop + ph) << "\" stroke=\"black\"/>\n";
  o << "<line x1=\"" << num(kLeft) << "\" y1=\"" << num(kTop) << "\" x2=\"" << num(kLeft) << "\" y2=\""
    << num(kTop + ph) << "\" stroke=\"black\"/>\n";
  o << "<text x=\"" << num(kLeft + pw / 2) << "\" y=\"" << kHeight - 10 << "\" text-anchor=\"middle\">Time (s)</text>\n";
  o << "<text x=\"16\" y=\"" << num(kTop + ph / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
    << num(kTop + ph / 2) << ")\">" << escape_xml(chart.y_label) << "</text>\n";

  for (const auto& s : chart.series) {
    if (s.points.empty()) continue;
    o << "<polyline fill=\"none\" stroke=\"" << escape_xml(s.color) << "\" stroke-width=\"1.2\" points=\"";
    for (std::size_t i = 0; i < s.points.size(); ++i)
      o << (i ? " " : "") << num(x(s.points[i].first)) << "," << num(y(s.points[i].second));
    o << "\"/>\n";
  }
  if (chart.onset_s) {
    const double ox = x(*chart.onset_s);
    o << "<line x1=\"" << num(ox) << "\" y1=\"" << num(kTop) << "\" x2=\"" << num(ox) << "\" y2=\"" << num(kTop + ph)
      << "\" stroke=\"#c00000\" stroke-dasharray=\"6,4\"/>\n";
    o << "<text x=\"" << num(ox + 4) << "\" y=\"" << num(kTop + 12) << "\" fill=\"#c00000\">miner onset ("
      << format_exact(*chart.onset_s) << " s)</text>\n";
  }
  double ly = kTop + 12;
  for (const auto& s : chart.series) {
    const double lx = kLeft + pw - 150;
    o << "<line x1=\"" << num(lx) << "\" y1=\"" << num(ly - 4) << "\" x2=\"" << num(lx + 20) << "\" y2=\""
      << num(ly - 4) << "\" stroke=\"" << escape_xml(s.color) << "\" stroke-width=\"2\"/>\n";
    o << "<text x=\"" << num(lx + 26) << "\" y=\"" << num(ly) << "\">" << escape_xml(s.name) << "</text>\n";
    ly += 16;
  }
  o << "</svg>\n";
  return o.str();
}

ChartSpec fps_chart(const Trace& mixed) {
  return {"Frame rate: " + mixed.meta.scenario_id, "Frame rate (fps)", {series_of(mixed, "fps", "#1f77b4", true)},
          first_miner_time(mixed)};
}

ChartSpec power_chart(const Trace& mixed) {
  return {"GPU power: " + mixed.meta.scenario_id, "Power (W)", {series_of(mixed, "power", "#ff7f0e", false)},
          first_miner_time(mixed)};
}

ChartSpec fps_chart(const Trace& benign, const Trace& miner) {
  return {"Frame rate with vs without miner",
          "Frame rate (fps)",
          {series_of(benign, "without miner", "#1f77b4", true), series_of(miner, "with miner", "#d62728", true)},
          std::nullopt};
}

ChartSpec power_chart(const Trace& benign, const Trace& miner) {
  return {"GPU power usage",
          "Power (W)",
          {series_of(benign, "without miner", "#1f77b4", false), series_of(miner, "with miner", "#d62728", false)},
          std::nullopt};
}

}  // namespace gpusentinel
