#include "pitchcoach/stats.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pitchcoach/error.h"

namespace pitchcoach {

namespace {

constexpr double kCfEpsilon = 1e-16;
constexpr double kTiny = 1e-300;
constexpr int kCfMaxIterations = 10000;

double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sum_sq_dev(std::span<const double> v, double mean) {
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return s;
}

// Continued fraction for I_x(a, b), evaluated with the modified Lentz method.
double beta_continued_fraction(double x, double a, double b) {
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kCfMaxIterations; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kCfEpsilon) return h;
  }
  throw Error("incomplete beta: continued fraction did not converge");
}

}  // namespace

void GroupedData::validate() const {
  if (groups.size() < 2) throw InputError("anova: need at least 2 groups");
  for (const Group& g : groups) {
    if (g.values.size() < 2) throw InputError("anova: group '" + g.label + "' has fewer than 2 values");
    for (double v : g.values) {
      if (!std::isfinite(v)) throw InputError("anova: group '" + g.label + "' contains a non-finite value");
    }
  }
}

double regularized_incomplete_beta(double x, double a, double b) {
  if (!(a > 0.0) || !(b > 0.0)) throw DomainError("incomplete beta: a and b must be > 0");
  if (!(x >= 0.0 && x <= 1.0)) throw DomainError("incomplete beta: x outside [0, 1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double log_front =
      std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  // The fraction converges fast for x < (a+1)/(a+b+2); use the symmetry otherwise.
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(x, a, b) / a;
  return 1.0 - front * beta_continued_fraction(1.0 - x, b, a) / b;
}

double f_survival(double f, double d1, double d2) {
  if (std::isnan(f) || f < 0.0) throw DomainError("f_survival: f must be >= 0");
  if (!(d1 >= 1.0) || !(d2 >= 1.0)) throw DomainError("f_survival: degrees of freedom must be >= 1");
  if (f == 0.0) return 1.0;
  if (std::isinf(f)) return 0.0;
  const double x = d2 / (d2 + d1 * f);
  return std::clamp(regularized_incomplete_beta(x, d2 / 2.0, d1 / 2.0), 0.0, 1.0);
}

double t_two_sided_p(double t, double df) {
  if (std::isnan(t)) throw DomainError("t_two_sided_p: t is NaN");
  return f_survival(t * t, 1.0, df);
}

std::vector<double> bonferroni(std::span<const double> raw_p, std::size_t m) {
  if (m < raw_p.size()) throw DomainError("bonferroni: m smaller than the number of tests");
  std::vector<double> out;
  out.reserve(raw_p.size());
  for (double p : raw_p) {
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("bonferroni: p-value outside [0, 1]");
    out.push_back(std::min(1.0, p * static_cast<double>(m)));
  }
  return out;
}

AnovaResult one_way_anova(const GroupedData& data) {
  data.validate();
  const std::size_t k = data.groups.size();
  std::size_t n_total = 0;
  double grand_sum = 0.0;
  for (const Group& g : data.groups) {
    n_total += g.values.size();
    for (double v : g.values) grand_sum += v;
  }
  const double grand_mean = grand_sum / static_cast<double>(n_total);

  AnovaResult r;
  r.df_between = k - 1;
  r.df_within = n_total - k;
  std::vector<double> means;
  std::vector<double> ss;
  for (const Group& g : data.groups) {
    const double m = mean_of(g.values);
    means.push_back(m);
    ss.push_back(sum_sq_dev(g.values, m));
    r.ss_between += static_cast<double>(g.values.size()) * (m - grand_mean) * (m - grand_mean);
    r.ss_within += ss.back();
  }

  const double msb = r.ss_between / static_cast<double>(r.df_between);
  const double msw = r.ss_within / static_cast<double>(r.df_within);
  if (msw > 0.0) {
    r.f_stat = msb / msw;
    r.p_value = f_survival(r.f_stat, static_cast<double>(r.df_between), static_cast<double>(r.df_within));
  } else if (msb > 0.0) {
    r.f_stat = std::numeric_limits<double>::infinity();
    r.p_value = 0.0;
  } else {
    r.f_stat = 0.0;
    r.p_value = 1.0;
  }

  std::vector<double> raw;
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = a + 1; b < k; ++b) {
      const auto na = static_cast<double>(data.groups[a].values.size());
      const auto nb = static_cast<double>(data.groups[b].values.size());
      PairwiseComparison pc;
      pc.label_a = data.groups[a].label;
      pc.label_b = data.groups[b].label;
      pc.df = static_cast<std::size_t>(na + nb - 2.0);
      const double pooled = (ss[a] + ss[b]) / (na + nb - 2.0);
      const double se = std::sqrt(pooled * (1.0 / na + 1.0 / nb));
      const double diff = means[a] - means[b];
      if (se > 0.0) {
        pc.t_stat = diff / se;
        pc.raw_p = t_two_sided_p(pc.t_stat, static_cast<double>(pc.df));
      } else if (diff != 0.0) {
        pc.t_stat = std::copysign(std::numeric_limits<double>::infinity(), diff);
        pc.raw_p = 0.0;
      } else {
        pc.t_stat = 0.0;
        pc.raw_p = 1.0;
      }
      raw.push_back(pc.raw_p);
      r.pairwise.push_back(pc);
    }
  }
  const std::vector<double> adjusted = bonferroni(raw, raw.size());
  for (std::size_t i = 0; i < adjusted.size(); ++i) r.pairwise[i].adjusted_p = adjusted[i];
  return r;
}

std::vector<std::optional<double>> block_average(const ChannelSeries& series, std::span<const TimeWindow> windows,
                                                 std::span<const std::size_t> channels) {
  for (std::size_t c : channels) {
    if (c >= series.channel_names.size()) throw InputError("block_average: channel index out of range");
  }
  std::vector<std::optional<double>> out;
  out.reserve(windows.size());
  for (const TimeWindow& w : windows) {
    const double end = w.onset_ms + w.duration_ms;
    auto lo = std::lower_bound(series.t_ms.begin(), series.t_ms.end(), w.onset_ms);
    auto hi = std::lower_bound(lo, series.t_ms.end(), end);
    double sum = 0.0;
    std::size_t count = 0;
    for (auto it = lo; it != hi; ++it) {
      const auto& row = series.rows[static_cast<std::size_t>(it - series.t_ms.begin())];
      for (std::size_t c : channels) {
        sum += row[c];
        ++count;
      }
    }
    out.push_back(count ? std::optional<double>(sum / static_cast<double>(count)) : std::nullopt);
  }
  return out;
}

}  // namespace pitchcoach
