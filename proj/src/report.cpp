#include "archloop/report.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>
#include <system_error>

#include "archloop/error.hpp"

namespace archloop {

namespace {

// Shortest text that parses back to the same double.
std::string num(double x) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
  if (ec != std::errc{}) throw std::runtime_error("number formatting failed");
  return std::string(buf, end);
}

std::string num(const std::optional<double>& x) { return x ? num(*x) : std::string(); }

std::string fixed(double x, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, x);
  return buf;
}

std::string pct(const std::optional<double>& x, int decimals) {
  return x ? fixed(100.0 * *x, decimals) : std::string("-");
}

std::string pct_ci(const std::optional<Interval>& ci, int decimals) {
  if (!ci) return {};
  return " [" + fixed(100.0 * ci->lo, decimals) + ", " + fixed(100.0 * ci->hi, decimals) + "]";
}

constexpr const char* kCsvHeader =
    "cycle,valid_pct,best_pct,mean_pct,above_threshold_pct,unique,total_train,"
    "threshold,n_gen,n_valid,valid_rate,valid_rate_ci_lo,valid_rate_ci_hi,"
    "best_acc,mean_acc,median_acc,std_acc,mean_acc_ci_lo,mean_acc_ci_hi,"
    "n_above_threshold,frac_above_threshold,frac_above_threshold_ci_lo,"
    "frac_above_threshold_ci_hi,n_near_duplicate,complete";

std::optional<double> scaled(const std::optional<double>& x) {
  if (!x) return std::nullopt;
  return 100.0 * *x;
}

std::string csv_row(const CycleStats& s) {
  std::vector<std::string> f = {
      std::to_string(s.cycle),
      num(100.0 * s.valid_rate),
      num(scaled(s.best_acc)),
      num(scaled(s.mean_acc)),
      num(scaled(s.frac_above_threshold)),
      std::to_string(s.n_unique_accepted),
      std::to_string(s.corpus_size_after),
      num(s.threshold),
      std::to_string(s.n_gen),
      std::to_string(s.n_valid),
      num(s.valid_rate),
      num(s.valid_rate_ci.lo),
      num(s.valid_rate_ci.hi),
      num(s.best_acc),
      num(s.mean_acc),
      num(s.median_acc),
      num(s.std_acc),
      s.mean_acc_ci ? num(s.mean_acc_ci->lo) : std::string(),
      s.mean_acc_ci ? num(s.mean_acc_ci->hi) : std::string(),
      std::to_string(s.n_above_threshold),
      num(s.frac_above_threshold),
      s.frac_above_threshold_ci ? num(s.frac_above_threshold_ci->lo) : std::string(),
      s.frac_above_threshold_ci ? num(s.frac_above_threshold_ci->hi) : std::string(),
      std::to_string(s.n_near_duplicate),
      s.complete ? "1" : "0",
  };
  std::string row;
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (i) row += ',';
    row += f[i];
  }
  return row;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(sep, start);
    out.push_back(line.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

double parse_double(std::string_view s) {
  double x = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw std::invalid_argument("bad number in report: '" + std::string(s) + "'");
  }
  return x;
}

std::optional<double> parse_opt(std::string_view s) {
  if (s.empty()) return std::nullopt;
  return parse_double(s);
}

template <typename Int>
Int parse_int(std::string_view s) {
  Int x{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw std::invalid_argument("bad integer in report: '" + std::string(s) + "'");
  }
  return x;
}

std::optional<Interval> parse_ci(std::string_view lo, std::string_view hi) {
  if (lo.empty() && hi.empty()) return std::nullopt;
  return Interval{parse_double(lo), parse_double(hi)};
}

}  // namespace

ReportFormat parse_report_format(std::string_view name) {
  if (name == "csv") return ReportFormat::Csv;
  if (name == "md") return ReportFormat::Markdown;
  throw UnknownFormat("unknown report format '" + std::string(name) + "' (expected csv or md)");
}

std::string emit_report(const std::vector<CycleStats>& stats, ReportFormat format) {
  if (stats.empty()) throw std::invalid_argument("emit_report needs at least one cycle");
  std::ostringstream out;
  if (format == ReportFormat::Csv) {
    out << kCsvHeader << '\n';
    for (const auto& s : stats) out << csv_row(s) << '\n';
    return out.str();
  }
  const std::string thr = fixed(100.0 * stats.front().threshold, 0);
  out << "| Cycle | Valid (%) | Best (%) | Mean (%) | ≥" << thr
      << "% (%) | Unique | Total train |\n";
  out << "|---:|---|---:|---|---|---:|---:|\n";
  for (const auto& s : stats) {
    out << "| " << s.cycle << (s.complete ? "" : "*") << " | " << fixed(100.0 * s.valid_rate, 1)
        << pct_ci(s.valid_rate_ci, 1) << " | " << pct(s.best_acc, 2) << " | " << pct(s.mean_acc, 2)
        << pct_ci(s.mean_acc_ci, 2) << " | " << pct(s.frac_above_threshold, 2)
        << pct_ci(s.frac_above_threshold_ci, 2) << " | " << s.n_unique_accepted << " | "
        << s.corpus_size_after << " |\n";
  }
  return out.str();
}

std::vector<CycleStats> parse_report_csv(std::string_view csv) {
  std::vector<CycleStats> out;
  bool header = true;
  for (std::string_view line : split(csv, '\n')) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (header) {
      if (line != kCsvHeader) throw std::invalid_argument("unexpected report header");
      header = false;
      continue;
    }
    const auto f = split(line, ',');
    if (f.size() != 25) throw std::invalid_argument("report row has wrong field count");
    CycleStats s;
    s.cycle = parse_int<int>(f[0]);
    s.n_unique_accepted = parse_int<std::size_t>(f[5]);
    s.corpus_size_after = parse_int<std::size_t>(f[6]);
    s.threshold = parse_double(f[7]);
    s.n_gen = parse_int<std::size_t>(f[8]);
    s.n_valid = parse_int<std::size_t>(f[9]);
    s.valid_rate = parse_double(f[10]);
    s.valid_rate_ci = Interval{parse_double(f[11]), parse_double(f[12])};
    s.best_acc = parse_opt(f[13]);
    s.mean_acc = parse_opt(f[14]);
    s.median_acc = parse_opt(f[15]);
    s.std_acc = parse_opt(f[16]);
    s.mean_acc_ci = parse_ci(f[17], f[18]);
    s.n_above_threshold = parse_int<std::size_t>(f[19]);
    s.frac_above_threshold = parse_opt(f[20]);
    s.frac_above_threshold_ci = parse_ci(f[21], f[22]);
    s.n_near_duplicate = parse_int<std::size_t>(f[23]);
    s.complete = f[24] == "1";
    out.push_back(s);
  }
  if (header) throw std::invalid_argument("report is empty");
  return out;
}

std::string emit_plot_data(const std::vector<CycleStats>& stats) {
  std::ostringstream out;
  out << "metric,cycle,value,ci_lo,ci_hi\n";
  auto row = [&](const char* metric, int cycle, const std::optional<double>& v,
                 const std::optional<Interval>& ci) {
    if (!v) return;
    out << metric << ',' << cycle << ',' << num(*v) << ',' << (ci ? num(ci->lo) : "") << ','
        << (ci ? num(ci->hi) : "") << '\n';
  };
  for (const auto& s : stats) {
    row("valid_rate", s.cycle, s.valid_rate, s.valid_rate_ci);
    row("best_acc", s.cycle, s.best_acc, std::nullopt);
    row("mean_acc", s.cycle, s.mean_acc, s.mean_acc_ci);
    row("frac_above_threshold", s.cycle, s.frac_above_threshold, s.frac_above_threshold_ci);
    row("corpus_size_after", s.cycle, static_cast<double>(s.corpus_size_after), std::nullopt);
  }
  return out.str();
}

}  // namespace archloop
