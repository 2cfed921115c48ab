#include "gesturelab/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/binomial.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "gesturelab/error.hpp"

namespace gesturelab {

double mean_of(const std::vector<double>& xs) {
  check_arg(!xs.empty(), "mean of an empty list");
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double sample_sd(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean_of(xs);
  double acc = 0.0;
  for (double x : xs) acc += (x - m) * (x - m);
  return std::sqrt(acc / static_cast<double>(xs.size() - 1));
}

double cosine_similarity(const Tensor& a, const Tensor& b) {
  check_arg(a.numel() == b.numel() && a.numel() > 0, "cosine: length mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (int64_t i = 0; i < a.numel(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  check(na > 0.0 && nb > 0.0, ErrorKind::Numeric, "cosine: zero-norm vector");
  return dot / std::sqrt(na * nb);
}

std::vector<double> average_ranks(const std::vector<double>& xs) {
  const size_t n = xs.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return xs[a] < xs[b]; });
  std::vector<double> ranks(n, 0.0);
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && xs[order[j + 1]] == xs[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;  // average of 1-based positions
    for (size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

namespace {

// Pearson correlation; nullopt when either side is constant.
std::optional<double> pearson(const std::vector<double>& xs, const std::vector<double>& ys) {
  const size_t n = xs.size();
  const double mx = mean_of(xs), my = mean_of(ys);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double dx = xs[i] - mx, dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  return sxy / std::sqrt(sxx * syy);
}

double student_two_sided_p(double t, double df) {
  if (!std::isfinite(t)) return 0.0;
  boost::math::students_t dist(df);
  return 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(t)));
}

}  // namespace

std::optional<Correlation> spearman(const std::vector<double>& xs,
                                    const std::vector<double>& ys) {
  check_arg(xs.size() == ys.size(), "spearman: length mismatch");
  check_arg(xs.size() >= 3, "spearman: needs at least 3 observations");
  const auto rho = pearson(average_ranks(xs), average_ranks(ys));
  if (!rho) return std::nullopt;
  Correlation c;
  c.rho = *rho;
  const double n = static_cast<double>(xs.size());
  if (std::fabs(c.rho) >= 1.0) {
    c.p = 0.0;
  } else {
    const double t = c.rho * std::sqrt((n - 2.0) / (1.0 - c.rho * c.rho));
    c.p = student_two_sided_p(t, n - 2.0);
  }
  return c;
}

std::optional<TTest> ttest_independent(const std::vector<double>& a,
                                       const std::vector<double>& b) {
  check_arg(a.size() >= 2 && b.size() >= 2, "t-test: each sample needs at least 2 values");
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  const double ma = mean_of(a), mb = mean_of(b);
  const double va = sample_sd(a) * sample_sd(a), vb = sample_sd(b) * sample_sd(b);
  const double se2 = va / na + vb / nb;
  if (se2 == 0.0) return std::nullopt;
  TTest r;
  r.t = (ma - mb) / std::sqrt(se2);
  r.df = se2 * se2 /
         (va * va / (na * na * (na - 1.0)) + vb * vb / (nb * nb * (nb - 1.0)));
  r.p = student_two_sided_p(r.t, r.df);
  return r;
}

KsResult ks_uniform(std::vector<double> values) {
  check_arg(!values.empty(), "ks test: empty sample");
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  double d = 0.0;
  for (size_t i = 0; i < values.size(); ++i) {
    const double x = std::clamp(values[i], 0.0, 1.0);
    d = std::max(d, std::fabs(static_cast<double>(i + 1) / n - x));
    d = std::max(d, std::fabs(x - static_cast<double>(i) / n));
  }
  KsResult r;
  r.d = d;
  const double lambda = (std::sqrt(n) + 0.12 + 0.11 / std::sqrt(n)) * d;
  double p = 0.0;
  for (int j = 1; j <= 100; ++j) {
    const double term = 2.0 * std::pow(-1.0, j - 1) * std::exp(-2.0 * j * j * lambda * lambda);
    p += term;
    if (std::fabs(term) < 1e-12) break;
  }
  r.p = std::clamp(p, 0.0, 1.0);
  return r;
}

BinomialCi binomial_ci(int64_t successes, int64_t trials, double z) {
  check_arg(trials > 0 && successes >= 0 && successes <= trials, "binomial ci: bad counts");
  const double n = static_cast<double>(trials);
  const double phat = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = phat + z2 / (2.0 * n);
  const double half = z * std::sqrt(phat * (1.0 - phat) / n + z2 / (4.0 * n * n));
  BinomialCi ci;
  ci.low = std::max(0.0, (center - half) / denom);
  ci.high = std::min(1.0, (center + half) / denom);
  return ci;
}

double binomial_sf(int64_t k, int64_t n, double p0) {
  check_arg(n > 0 && k >= 0 && k <= n, "binomial tail: bad counts");
  check_arg(p0 > 0.0 && p0 < 1.0, "binomial tail: p0 outside (0, 1)");
  if (k == 0) return 1.0;
  boost::math::binomial_distribution<double> dist(static_cast<double>(n), p0);
  return boost::math::cdf(boost::math::complement(dist, static_cast<double>(k - 1)));
}

}  // namespace gesturelab
