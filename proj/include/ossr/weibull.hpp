#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "ossr/common.hpp"

namespace ossr {

// ----------------------------------------------------------------------------
// Weibull tail model for latent-distance outlier scoring.
//
// outlier_prob(d) = 1 - exp(-(|d - location| / scale)^shape)
//
// Fitting selects the largest ceil(tail_fraction * n) distances (at least 20),
// anchors the location just below the tail minimum, and solves the standard
// two-parameter Weibull maximum-likelihood shape equation by safeguarded
// Newton iteration. The shape equation
//
//   g(k) = sum(x^k ln x)/sum(x^k) - 1/k - mean(ln x)
//
// is strictly increasing in k, so the bracketed Newton always converges.
// ----------------------------------------------------------------------------

struct WeibullParams {
  double location = 0.0;  // tau
  double shape = 1.0;     // kappa, > 0
  double scale = 1.0;     // gamma, > 0
};

constexpr std::size_t kWeibullMinPoints = 20;

inline double weibull_outlier_prob(double distance, const WeibullParams& p) {
  const double t = std::abs(distance - p.location) / p.scale;
  const double prob = -std::expm1(-std::pow(t, p.shape));
  // mathematically in [0,1); keep it there when pow overflows
  return std::min(prob, std::nextafter(1.0, 0.0));
}

namespace detail {

struct ShapeEq {
  const std::vector<double>& x;     // normalized tail, max element == 1
  const std::vector<double>& lnx;
  double mean_lnx;

  // value and derivative of g at shape k
  void eval(double k, double& g, double& dg) const {
    double b = 0.0, a = 0.0, c = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double w = std::pow(x[i], k);
      b += w;
      a += w * lnx[i];
      c += w * lnx[i] * lnx[i];
    }
    g = a / b - 1.0 / k - mean_lnx;
    dg = (c * b - a * a) / (b * b) + 1.0 / (k * k);
  }
};

}  // namespace detail

/// Fit (location, shape, scale) to the tail of a distance sample.
/// tail_fraction selects the upper quantile used for fitting (1.0 = all).
/// When the location is known a priori, pass it; the data-driven anchor at
/// the tail minimum is only asymptotically unbiased.
inline WeibullParams fit_weibull(const std::vector<double>& distances, double tail_fraction,
                                 std::optional<double> known_location = std::nullopt) {
  const std::size_t n = distances.size();
  if (n < kWeibullMinPoints) {
    throw DataError("weibull fit needs at least " + std::to_string(kWeibullMinPoints) +
                    " distances, got " + std::to_string(n));
  }
  if (tail_fraction <= 0.0 || tail_fraction > 1.0) {
    throw UsageError("weibull fit: tail_fraction must be in (0, 1]");
  }
  for (double d : distances) {
    if (!(d >= 0.0) || !std::isfinite(d)) {
      throw DataError("weibull fit: distances must be finite and non-negative");
    }
  }

  std::vector<double> sorted = distances;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t want =
      std::max<std::size_t>(kWeibullMinPoints,
                            static_cast<std::size_t>(std::ceil(tail_fraction * static_cast<double>(n))));
  const std::size_t m = std::min(n, want);
  std::vector<double> tail(sorted.end() - static_cast<std::ptrdiff_t>(m), sorted.end());

  const double tail_min = tail.front();
  const double tail_max = tail.back();
  const double range = tail_max - tail_min;
  if (!(range > 0.0) || range <= 1e-12 * std::max(1.0, std::abs(tail_max))) {
    throw NumericError("weibull fit: zero-variance distances");
  }

  WeibullParams params;
  if (known_location.has_value()) {
    params.location = *known_location;
    if (!(tail_min > params.location)) {
      throw UsageError("weibull fit: known location must lie below the fitted tail");
    }
  } else {
    params.location = tail_min - 1e-6 * range;
  }

  // shift and normalize by the maximum: shape is scale-invariant, and
  // x <= 1 keeps x^k from overflowing
  const double norm = tail_max - params.location;
  std::vector<double> x(m), lnx(m);
  double mean_lnx = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    x[i] = (tail[i] - params.location) / norm;
    lnx[i] = std::log(x[i]);
    mean_lnx += lnx[i];
  }
  mean_lnx /= static_cast<double>(m);

  double sd = 0.0;
  for (double l : lnx) sd += (l - mean_lnx) * (l - mean_lnx);
  sd = std::sqrt(sd / static_cast<double>(m));
  if (!(sd > 0.0)) throw NumericError("weibull fit: degenerate tail");

  detail::ShapeEq eq{x, lnx, mean_lnx};

  // bracket the root of the increasing g: negative for small k, positive for
  // large k (mean ln x < 0 after normalization)
  double lo = 1e-8, hi = std::max(1.0, 1.2822 / sd);  // pi/(sqrt(6) sd) start
  double g, dg;
  eq.eval(hi, g, dg);
  std::size_t grow = 0;
  while (g <= 0.0 && grow++ < 80) {
    lo = hi;
    hi *= 2.0;
    eq.eval(hi, g, dg);
  }
  if (g <= 0.0) throw NumericError("weibull fit: shape equation has no root in range");

  double k = std::min(std::max(1.2822 / sd, lo), hi);
  for (std::size_t it = 0; it < 200; ++it) {
    eq.eval(k, g, dg);
    if (g > 0.0) {
      hi = k;
    } else {
      lo = k;
    }
    double next = k - g / dg;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    const double delta = std::abs(next - k);
    k = next;
    if (delta < 1e-10) break;
  }
  params.shape = k;

  double mean_pow = 0.0;
  for (double xi : x) mean_pow += std::pow(xi, k);
  mean_pow /= static_cast<double>(m);
  params.scale = std::pow(mean_pow, 1.0 / k) * norm;

  if (!(params.shape > 0.0) || !(params.scale > 0.0) || !std::isfinite(params.shape) ||
      !std::isfinite(params.scale)) {
    throw NumericError("weibull fit: did not converge to valid parameters");
  }
  return params;
}

/// Inverse-CDF sampling, for self-tests and synthetic calibration data.
inline double weibull_sample(double u, double shape, double scale, double location = 0.0) {
  return location + scale * std::pow(-std::log1p(-u), 1.0 / shape);
}

}  // namespace ossr
