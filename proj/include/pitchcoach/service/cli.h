#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "pitchcoach/stats.h"

namespace pitchcoach::service {

/// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 1;
inline constexpr int kExitInternal = 2;

/// Entry point of the `pitchcoach` tool. Long-running subcommands (serve,
/// simulate-device) block until SIGINT or SIGTERM.
int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err);

/// `group,value` CSV (or `group,<metric>` when that column exists).
GroupedData read_grouped_csv(std::string_view text, const std::string& metric);

/// Fixed-format ANOVA table, 4 decimal places.
std::string format_anova_table(const AnovaResult& result, const std::string& metric);

}  // namespace pitchcoach::service
