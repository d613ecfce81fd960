#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <vector>

namespace oracle {

/// Neumaier-compensated sum.
inline double ksum(std::span<const double> xs) {
  double s = 0.0, c = 0.0;
  for (double x : xs) {
    const double t = s + x;
    c += std::abs(s) >= std::abs(x) ? (s - t) + x : (x - t) + s;
    s = t;
  }
  return s + c;
}

struct Anova {
  double ssb, ssw, f, df1, df2;
};

/// Definitional one-way ANOVA: SSB = sum n_i (mean_i - grand)^2,
/// SSW = sum (x - mean_i)^2, every sum compensated.
inline Anova anova(const std::vector<std::vector<double>>& groups) {
  std::vector<double> all;
  for (const auto& g : groups) all.insert(all.end(), g.begin(), g.end());
  const double grand = ksum(all) / static_cast<double>(all.size());
  std::vector<double> b_terms, w_terms;
  for (const auto& g : groups) {
    const double mean = ksum(g) / static_cast<double>(g.size());
    b_terms.push_back(static_cast<double>(g.size()) * (mean - grand) * (mean - grand));
    for (double x : g) w_terms.push_back((x - mean) * (x - mean));
  }
  Anova a;
  a.ssb = ksum(b_terms);
  a.ssw = ksum(w_terms);
  a.df1 = static_cast<double>(groups.size() - 1);
  a.df2 = static_cast<double>(all.size() - groups.size());
  a.f = (a.ssb / a.df1) / (a.ssw / a.df2);
  return a;
}

/// F0 from the highest normalized-autocorrelation peak in the lag range,
/// refined by parabolic interpolation. Independent of any spectral method.
inline std::optional<double> autocorr_f0(std::span<const double> x, double sr, double f_min, double f_max) {
  const std::size_t lag_lo = static_cast<std::size_t>(std::floor(sr / f_max));
  const std::size_t lag_hi = static_cast<std::size_t>(std::ceil(sr / f_min));
  if (x.size() < 2 * lag_hi) return std::nullopt;
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  auto r = [&](std::size_t lag) {
    double s = 0.0, e0 = 0.0, e1 = 0.0;
    for (std::size_t i = 0; i + lag < x.size(); ++i) {
      const double a = x[i] - mean, b = x[i + lag] - mean;
      s += a * b;
      e0 += a * a;
      e1 += b * b;
    }
    return e0 > 0 && e1 > 0 ? s / std::sqrt(e0 * e1) : 0.0;
  };
  std::vector<double> ac(lag_hi + 2, 0.0);
  for (std::size_t l = lag_lo > 0 ? lag_lo - 1 : 0; l <= lag_hi + 1; ++l) ac[l] = r(l);
  // Highest peak, preferring the shortest lag within 3% of it so that
  // period multiples do not win on ties.
  double best = -1.0;
  for (std::size_t l = lag_lo; l <= lag_hi; ++l) best = std::max(best, ac[l]);
  std::size_t pick = 0;
  for (std::size_t l = lag_lo; l <= lag_hi; ++l) {
    if (ac[l] >= ac[l - 1] && ac[l] >= ac[l + 1] && ac[l] >= 0.97 * best) {
      pick = l;
      break;
    }
  }
  if (pick == 0 || best <= 0.3) return std::nullopt;
  const double a = ac[pick - 1], b = ac[pick], c = ac[pick + 1];
  const double denom = a - 2 * b + c;
  const double delta = denom != 0.0 ? 0.5 * (a - c) / denom : 0.0;
  return sr / (static_cast<double>(pick) + delta);
}

}  // namespace oracle
