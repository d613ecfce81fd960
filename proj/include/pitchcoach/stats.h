#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace pitchcoach {

struct Group {
  std::string label;
  std::vector<double> values;
};

/// At least two groups of at least two finite values each.
struct GroupedData {
  std::vector<Group> groups;
  void validate() const;
};

struct PairwiseComparison {
  std::string label_a;
  std::string label_b;
  double t_stat = 0.0;
  std::size_t df = 0;
  double raw_p = 1.0;
  double adjusted_p = 1.0;
};

struct AnovaResult {
  double f_stat = 0.0;  ///< +infinity when within-group variance is zero and means differ
  std::size_t df_between = 0;
  std::size_t df_within = 0;
  double p_value = 1.0;
  double ss_between = 0.0;
  double ss_within = 0.0;
  std::vector<PairwiseComparison> pairwise;
};

/// Between-subjects one-way ANOVA with Bonferroni-corrected pooled-variance
/// pairwise t-tests over all k(k-1)/2 pairs.
AnovaResult one_way_anova(const GroupedData& data);

/// Regularized incomplete beta I_x(a, b), continued fraction (modified Lentz).
double regularized_incomplete_beta(double x, double a, double b);

/// P(F(d1, d2) > f). f may be +infinity.
double f_survival(double f, double d1, double d2);

/// Two-sided p-value of Student's t with `df` degrees of freedom.
double t_two_sided_p(double t, double df);

/// min(1, p * m) for each p.
std::vector<double> bonferroni(std::span<const double> raw_p, std::size_t m);

/// Time-stamped multichannel series, rows sorted by time.
struct ChannelSeries {
  std::vector<std::string> channel_names;
  std::vector<double> t_ms;
  std::vector<std::vector<double>> rows;  ///< rows[i][c]
};

struct TimeWindow {
  double onset_ms = 0.0;
  double duration_ms = 0.0;
};

/// Mean over the selected channels of every sample with t in [onset, onset + duration).
/// Windows with no samples yield nullopt.
std::vector<std::optional<double>> block_average(const ChannelSeries& series, std::span<const TimeWindow> windows,
                                                 std::span<const std::size_t> channels);

}  // namespace pitchcoach
