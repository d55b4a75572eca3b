#include "gpusentinel/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "gpusentinel/csv.hpp"
#include "gpusentinel/error.hpp"
#include "gpusentinel/numfmt.hpp"

namespace gpusentinel {
namespace {

// Days since 1970-01-01 for a proleptic Gregorian date (H. Hinnant).
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const auto yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, std::int64_t& y, unsigned& m, unsigned& d) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const auto doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = doy - (153 * mp + 2) / 5 + 1;
  m = mp < 10 ? mp + 3 : mp - 9;
  y += m <= 2;
}

bool is_leap(std::int64_t y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

unsigned days_in_month(std::int64_t y, unsigned m) {
  static constexpr unsigned kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  return m == 2 && is_leap(y) ? 29 : kDays[m - 1];
}

[[noreturn]] void fail_at(std::size_t line_no, const std::string& what) {
  std::ostringstream msg;
  msg << what << " at line " << line_no;
  throw DataError(msg.str());
}

std::vector<std::string> split_checked(std::string_view line, std::size_t expected,
                                       std::size_t line_no) {
  std::vector<std::string> f;
  try {
    f = csv::split_line(line);
  } catch (const DataError& e) {
    fail_at(line_no, e.what());
  }
  if (f.size() != expected) {
    std::ostringstream msg;
    msg << "expected " << expected << " columns, found " << f.size();
    fail_at(line_no, msg.str());
  }
  return f;
}

double number_field(const std::string& text, const char* column, std::size_t line_no) {
  double v = 0.0;
  if (!parse_double(text, v)) fail_at(line_no, std::string("invalid ") + column + " '" + text + "'");
  return v;
}

std::int64_t timestamp_field(const std::string& text, std::size_t line_no) {
  try {
    return parse_timestamp(text);
  } catch (const DataError& e) {
    fail_at(line_no, e.what());
  }
}

bool is_number(const std::string& text) {
  double v = 0.0;
  return parse_double(text, v);
}

bool is_timestamp(const std::string& text) {
  try {
    parse_timestamp(text);
    return true;
  } catch (const DataError&) {
    return false;
  }
}

// Header rows are only recognised on the first non-empty line.
template <typename Row, typename ParseLine>
std::vector<Row> parse_rows(std::string_view text, ParseLine parse_line, bool (*is_header)(std::string_view)) {
  std::vector<Row> rows;
  bool first = true;
  std::size_t line_no = 0;
  for (auto line : csv::lines(text)) {
    ++line_no;
    if (trim(line).empty()) continue;
    if (first) {
      first = false;
      if (is_header(line)) continue;
    }
    rows.push_back(parse_line(line, line_no));
  }
  return rows;
}

std::vector<std::string> split_lenient(std::string_view line) {
  try {
    return csv::split_line(line);
  } catch (const DataError&) {
    return {};
  }
}

// Customary precision when it round-trips, else shortest exact notation.
std::string column_value(double v, int decimals) {
  std::string fixed = format_fixed(v, decimals);
  double back = 0.0;
  if (parse_double(fixed, back) && back == v) return fixed;
  return format_exact(v);
}

double median_spacing(const std::vector<RawSamplerRow>& rows) {
  if (rows.size() < 2) return 1.0;
  std::vector<std::int64_t> gaps;
  gaps.reserve(rows.size() - 1);
  for (std::size_t i = 1; i < rows.size(); ++i) gaps.push_back(rows[i].timestamp_ms - rows[i - 1].timestamp_ms);
  std::nth_element(gaps.begin(), gaps.begin() + gaps.size() / 2, gaps.end());
  const auto g = gaps[gaps.size() / 2];
  return g > 0 ? static_cast<double>(g) / 1000.0 : 1.0;
}

}  // namespace

std::int64_t parse_timestamp(std::string_view text) {
  // YYYY/MM/DD HH:MM:SS.mmm
  const auto bad = [&]() -> DataError {
    return DataError("invalid timestamp '" + std::string(text) + "'");
  };
  if (text.size() != 23) throw bad();
  static constexpr std::string_view kShape = "dddd/dd/dd dd:dd:dd.ddd";
  for (std::size_t i = 0; i < kShape.size(); ++i) {
    const bool digit = text[i] >= '0' && text[i] <= '9';
    if (kShape[i] == 'd' ? !digit : text[i] != kShape[i]) throw bad();
  }
  const auto num = [&](std::size_t pos, std::size_t len) {
    std::int64_t v = 0;
    for (std::size_t i = pos; i < pos + len; ++i) v = v * 10 + (text[i] - '0');
    return v;
  };
  const std::int64_t y = num(0, 4);
  const auto mo = static_cast<unsigned>(num(5, 2));
  const auto d = static_cast<unsigned>(num(8, 2));
  const auto hh = num(11, 2), mi = num(14, 2), ss = num(17, 2), ms = num(20, 3);
  if (mo < 1 || mo > 12 || d < 1 || d > days_in_month(y, mo) || hh > 23 || mi > 59 || ss > 59)
    throw bad();
  return ((days_from_civil(y, mo, d) * 24 + hh) * 60 + mi) * 60000 + ss * 1000 + ms;
}

std::string format_timestamp(std::int64_t epoch_ms) {
  std::int64_t days = epoch_ms / 86400000;
  std::int64_t rem = epoch_ms % 86400000;
  if (rem < 0) {
    rem += 86400000;
    --days;
  }
  std::int64_t y;
  unsigned m, d;
  civil_from_days(days, y, m, d);
  char buf[40];
  std::snprintf(buf, sizeof buf, "%04lld/%02u/%02u %02lld:%02lld:%02lld.%03lld",
                static_cast<long long>(y), m, d, static_cast<long long>(rem / 3600000),
                static_cast<long long>(rem / 60000 % 60), static_cast<long long>(rem / 1000 % 60),
                static_cast<long long>(rem % 1000));
  return buf;
}

RawSamplerRow parse_sampler_line(std::string_view line, std::size_t line_no) {
  const auto f = split_checked(line, 6, line_no);
  RawSamplerRow r;
  r.timestamp_ms = timestamp_field(f[0], line_no);
  r.gpu_util = number_field(f[1], "gpu_util", line_no);
  r.mem_used = number_field(f[2], "mem_used", line_no);
  r.power = number_field(f[3], "power", line_no);
  r.sm_clock = number_field(f[4], "sm_clock", line_no);
  r.temperature = number_field(f[5], "temperature", line_no);
  return r;
}

RawKernelRow parse_kernel_line(std::string_view line, std::size_t line_no) {
  const auto f = split_checked(line, 6, line_no);
  RawKernelRow r;
  r.kernel_name = f[0];
  r.timestamp_ms = timestamp_field(f[1], line_no);
  r.duration_us = number_field(f[2], "duration_us", line_no);
  r.sm_throughput_pct = number_field(f[3], "sm_throughput_pct", line_no);
  r.dram_throughput_pct = number_field(f[4], "dram_throughput_pct", line_no);
  r.sm_freq_mhz = number_field(f[5], "sm_freq_mhz", line_no);
  return r;
}

RawFpsRow parse_fps_line(std::string_view line, std::size_t line_no) {
  const auto f = split_checked(line, 2, line_no);
  RawFpsRow r;
  r.timestamp_ms = timestamp_field(f[0], line_no);
  r.fps = number_field(f[1], "fps", line_no);
  if (r.fps < 0.0) fail_at(line_no, "negative fps '" + f[1] + "'");
  return r;
}

bool is_sampler_header(std::string_view line) {
  const auto f = split_lenient(line);
  return f.size() >= 2 && !is_number(f[1]);
}

bool is_kernel_header(std::string_view line) {
  const auto f = split_lenient(line);
  return f.size() >= 3 && !is_timestamp(f[1]) && !is_number(f[2]);
}

bool is_fps_header(std::string_view line) {
  const auto f = split_lenient(line);
  return f.size() >= 2 && !is_number(f[1]);
}

std::vector<RawSamplerRow> parse_sampler_csv(std::string_view text) {
  return parse_rows<RawSamplerRow>(text, parse_sampler_line, is_sampler_header);
}

std::vector<RawKernelRow> parse_kernel_csv(std::string_view text) {
  return parse_rows<RawKernelRow>(text, parse_kernel_line, is_kernel_header);
}

std::vector<RawFpsRow> parse_fps_log(std::string_view text) {
  return parse_rows<RawFpsRow>(text, parse_fps_line, is_fps_header);
}

std::vector<Label> parse_labels(std::string_view text) {
  std::vector<Label> out;
  std::size_t line_no = 0;
  for (auto line : csv::lines(text)) {
    ++line_no;
    const auto v = trim(line);
    if (v.empty()) continue;
    if (v == "0") out.push_back(Label::benign);
    else if (v == "1") out.push_back(Label::miner);
    else fail_at(line_no, "invalid label '" + std::string(v) + "'");
  }
  return out;
}

std::string format_sampler_line(const RawSamplerRow& r) {
  return format_timestamp(r.timestamp_ms) + ", " + column_value(r.gpu_util, 0) + ", " +
         column_value(r.mem_used, 0) + ", " + column_value(r.power, 2) + ", " +
         column_value(r.sm_clock, 0) + ", " + column_value(r.temperature, 0);
}

std::string format_kernel_line(const RawKernelRow& r) {
  return csv::escape(r.kernel_name) + "," + format_timestamp(r.timestamp_ms) + "," +
         column_value(r.duration_us, 1) + "," + column_value(r.sm_throughput_pct, 1) + "," +
         column_value(r.dram_throughput_pct, 1) + "," + column_value(r.sm_freq_mhz, 0);
}

std::string format_fps_line(const RawFpsRow& r) {
  return format_timestamp(r.timestamp_ms) + "," + column_value(r.fps, 1);
}

std::string format_sampler_csv(const std::vector<RawSamplerRow>& rows) {
  std::string out;
  for (const auto& r : rows) out += format_sampler_line(r) + "\n";
  return out;
}

std::string format_kernel_csv(const std::vector<RawKernelRow>& rows) {
  std::string out = "kernel_name,timestamp,duration_us,sm_throughput_pct,dram_throughput_pct,sm_freq_mhz\n";
  for (const auto& r : rows) out += format_kernel_line(r) + "\n";
  return out;
}

std::string format_fps_log(const std::vector<RawFpsRow>& rows) {
  std::string out;
  for (const auto& r : rows) out += format_fps_line(r) + "\n";
  return out;
}

RawLogs export_raw(const Trace& trace, std::int64_t origin_ms) {
  const auto ms = [origin_ms](double t) { return origin_ms + static_cast<std::int64_t>(std::llround(t * 1000.0)); };
  // Values are quantized to the precision the real tools print.
  const auto q = [](double v, int decimals) {
    double out = 0.0;
    parse_double(format_fixed(v, decimals), out);
    return out;
  };
  RawLogs logs;
  for (const auto& s : trace.samples) {
    logs.sampler.push_back({ms(s.t), q(s.gpu_util, 0), q(s.mem_used, 0), q(s.power, 2), q(s.sm_clock, 0),
                            q(s.temperature, 0)});
    if (s.fps) logs.fps.push_back({ms(s.t), q(*s.fps, 1)});
  }
  for (const auto& k : trace.kernels)
    logs.kernels.push_back(
        {k.kernel_name, ms(k.t), q(k.duration_us, 1), q(k.sm_throughput, 1), q(k.dram_throughput, 1), q(k.sm_freq, 0)});
  return logs;
}

AbsSample to_abs(const RawSamplerRow& r) {
  return AbsSample{r.timestamp_ms, r.gpu_util, r.mem_used, r.power, r.sm_clock, r.temperature};
}

AbsKernel to_abs(const RawKernelRow& r) {
  return AbsKernel{r.timestamp_ms, r.kernel_name, r.duration_us, r.sm_throughput_pct,
                   r.dram_throughput_pct, r.sm_freq_mhz};
}

FpsReading to_abs(const RawFpsRow& r) { return FpsReading{r.timestamp_ms, r.fps}; }

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

Trace load_trace(const std::filesystem::path& sampler_path, const LoadOptions& options) {
  if (!std::filesystem::exists(sampler_path))
    throw DataError("sampler file '" + sampler_path.string() + "' does not exist");
  const auto sampler_rows = parse_sampler_csv(read_file(sampler_path));

  std::vector<AbsSample> samples;
  samples.reserve(sampler_rows.size());
  for (const auto& r : sampler_rows) samples.push_back(to_abs(r));

  std::vector<AbsKernel> kernels;
  if (options.kernel_path) {
    for (const auto& r : parse_kernel_csv(read_file(*options.kernel_path))) kernels.push_back(to_abs(r));
  }
  std::vector<FpsReading> fps;
  if (options.fps_path) {
    for (const auto& r : parse_fps_log(read_file(*options.fps_path))) fps.push_back(to_abs(r));
  }

  AlignOptions align;
  align.interval_s = options.interval_s.value_or(median_spacing(sampler_rows));
  if (options.labels_path) align.labels = parse_labels(read_file(*options.labels_path));

  Trace trace = align_streams(samples, kernels, fps, align);
  trace.meta.scenario_id = sampler_path.stem().string();
  trace.meta.description = "ingested from " + sampler_path.filename().string();
  return trace;
}

// ---- canonical trace file ----------------------------------------------

namespace {

void check_single_line(const std::string& value, const char* key) {
  if (value.find_first_of("\r\n") != std::string::npos)
    throw DataError(std::string("meta.") + key + " must be a single line");
}

double canonical_number(const std::string& text, std::size_t line_no) {
  return number_field(text, "number", line_no);
}

}  // namespace

std::string serialize_trace(const Trace& trace) {
  check_single_line(trace.meta.scenario_id, "scenario_id");
  check_single_line(trace.meta.description, "description");
  check_single_line(trace.meta.rng, "rng");
  std::string out;
  out.reserve(trace.samples.size() * 80 + trace.kernels.size() * 80 + 256);
  out += kTraceHeader;
  out += "\n[meta]\n";
  out += "scenario_id=" + trace.meta.scenario_id + "\n";
  out += "seed=" + std::to_string(trace.meta.seed) + "\n";
  out += "interval_s=" + format_exact(trace.meta.interval_s) + "\n";
  out += "description=" + trace.meta.description + "\n";
  out += "rng=" + trace.meta.rng + "\n";
  out += "onset_s=" + (trace.meta.onset_s ? format_exact(*trace.meta.onset_s) : std::string()) + "\n";
  out += "[samples]\nt,gpu_util,mem_used,power,sm_clock,temperature,fps\n";
  for (const auto& s : trace.samples) {
    out += format_exact(s.t) + "," + format_exact(s.gpu_util) + "," + format_exact(s.mem_used) +
           "," + format_exact(s.power) + "," + format_exact(s.sm_clock) + "," +
           format_exact(s.temperature) + "," + (s.fps ? format_exact(*s.fps) : std::string()) + "\n";
  }
  out += "[kernels]\nt,kernel_name,duration_us,sm_throughput,dram_throughput,sm_freq\n";
  for (const auto& k : trace.kernels) {
    out += format_exact(k.t) + "," + csv::escape(k.kernel_name) + "," + format_exact(k.duration_us) +
           "," + format_exact(k.sm_throughput) + "," + format_exact(k.dram_throughput) + "," +
           format_exact(k.sm_freq) + "\n";
  }
  out += "[labels]\n";
  for (auto l : trace.labels) out += l == Label::miner ? "1\n" : "0\n";
  return out;
}

Trace deserialize_trace(std::string_view text) {
  const auto all = csv::lines(text);
  if (all.empty()) throw DataError("empty trace file");
  const auto head = trim(all[0]);
  constexpr std::string_view kMagic = "GPUSENTINEL-TRACE v";
  if (head.substr(0, kMagic.size()) != kMagic) throw DataError("not a canonical trace file");
  if (head != kTraceHeader)
    throw DataError("unsupported version '" + std::string(head.substr(kMagic.size())) + "'");

  Trace trace;
  std::string section;
  bool expect_columns = false;
  std::map<std::string, std::string> meta;
  for (std::size_t i = 1; i < all.size(); ++i) {
    const std::size_t line_no = i + 1;
    const auto line = all[i];
    if (line.empty()) continue;
    if (line.front() == '[' && line.back() == ']') {
      section = std::string(line.substr(1, line.size() - 2));
      if (section != "meta" && section != "samples" && section != "kernels" && section != "labels")
        fail_at(line_no, "unknown section '" + section + "'");
      expect_columns = section == "samples" || section == "kernels";
      continue;
    }
    if (expect_columns) {
      expect_columns = false;
      continue;
    }
    if (section == "meta") {
      const auto eq = line.find('=');
      if (eq == std::string_view::npos) fail_at(line_no, "expected key=value");
      meta[std::string(line.substr(0, eq))] = std::string(line.substr(eq + 1));
    } else if (section == "samples") {
      const auto f = split_checked(line, 7, line_no);
      TelemetrySample s;
      s.t = canonical_number(f[0], line_no);
      s.gpu_util = canonical_number(f[1], line_no);
      s.mem_used = canonical_number(f[2], line_no);
      s.power = canonical_number(f[3], line_no);
      s.sm_clock = canonical_number(f[4], line_no);
      s.temperature = canonical_number(f[5], line_no);
      if (!f[6].empty()) s.fps = canonical_number(f[6], line_no);
      trace.samples.push_back(s);
    } else if (section == "kernels") {
      const auto f = split_checked(line, 6, line_no);
      KernelRecord k;
      k.t = canonical_number(f[0], line_no);
      k.kernel_name = f[1];
      k.duration_us = canonical_number(f[2], line_no);
      k.sm_throughput = canonical_number(f[3], line_no);
      k.dram_throughput = canonical_number(f[4], line_no);
      k.sm_freq = canonical_number(f[5], line_no);
      trace.kernels.push_back(std::move(k));
    } else if (section == "labels") {
      const auto v = trim(line);
      if (v == "0") trace.labels.push_back(Label::benign);
      else if (v == "1") trace.labels.push_back(Label::miner);
      else fail_at(line_no, "invalid label '" + std::string(v) + "'");
    } else {
      fail_at(line_no, "data outside any section");
    }
  }

  const auto get = [&](const char* key) -> const std::string& {
    auto it = meta.find(key);
    if (it == meta.end()) throw DataError(std::string("missing meta key '") + key + "'");
    return it->second;
  };
  trace.meta.scenario_id = get("scenario_id");
  trace.meta.description = get("description");
  trace.meta.rng = get("rng");
  {
    const auto& text = get("seed");
    auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), trace.meta.seed);
    if (text.empty() || ec != std::errc() || p != text.data() + text.size())
      throw DataError("invalid meta seed");
  }
  if (!parse_double(get("interval_s"), trace.meta.interval_s)) throw DataError("invalid meta interval_s");
  if (const auto& onset = get("onset_s"); !onset.empty()) {
    double v = 0.0;
    if (!parse_double(onset, v)) throw DataError("invalid meta onset_s");
    trace.meta.onset_s = v;
  }
  if (trace.labels.size() != trace.samples.size()) {
    std::ostringstream msg;
    msg << trace.samples.size() << " samples, " << trace.labels.size() << " labels";
    throw DataError(msg.str());
  }
  return trace;
}

void save_trace(const Trace& trace, const std::filesystem::path& path) {
  write_file(path, serialize_trace(trace));
}

Trace load_canonical(const std::filesystem::path& path) { return deserialize_trace(read_file(path)); }

}  // namespace gpusentinel
