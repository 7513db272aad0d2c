#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "archloop/stats.hpp"

namespace archloop {

enum class ReportFormat { Csv, Markdown };

/// "csv" or "md". Throws UnknownFormat otherwise.
ReportFormat parse_report_format(std::string_view name);

/// Per-cycle table: Cycle, Valid(%), Best(%), Mean(%), >=thr(%), Unique,
/// Total-train. The CSV form appends every CycleStats field at full
/// precision so parse_report_csv() recovers the input exactly. Markdown
/// rounds to one (valid rate) or two decimals. Throws std::invalid_argument
/// on an empty list.
std::string emit_report(const std::vector<CycleStats>& stats, ReportFormat format);

std::vector<CycleStats> parse_report_csv(std::string_view csv);

/// Long-form series for plotting: metric,cycle,value,ci_lo,ci_hi.
std::string emit_plot_data(const std::vector<CycleStats>& stats);

}  // namespace archloop
