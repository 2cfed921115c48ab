#pragma once

#include <optional>
#include <vector>

#include "gesturelab/tensor.hpp"

namespace gesturelab {

double mean_of(const std::vector<double>& xs);
double sample_sd(const std::vector<double>& xs);  // n-1 denominator; 0 for n < 2

// Cosine similarity of two equal-length vectors; zero norm is a numeric error.
double cosine_similarity(const Tensor& a, const Tensor& b);

// Ranks with ties assigned the average of the positions they span (1-based).
std::vector<double> average_ranks(const std::vector<double>& xs);

struct Correlation {
  double rho = 0.0;
  double p = 1.0;
};

// Spearman rank correlation with the t-approximation p-value (n-2 df).
// Nullopt when either input is constant (the coefficient is undefined).
std::optional<Correlation> spearman(const std::vector<double>& xs,
                                    const std::vector<double>& ys);

struct TTest {
  double t = 0.0;
  double p = 1.0;
  double df = 0.0;
};

// Welch's unequal-variance two-sample t-test, two-sided p.
// Nullopt when both samples have zero variance (statistic undefined).
std::optional<TTest> ttest_independent(const std::vector<double>& a,
                                       const std::vector<double>& b);

struct KsResult {
  double d = 0.0;
  double p = 1.0;
};

// One-sample Kolmogorov-Smirnov test against U[0,1] with the asymptotic
// p-value; used to calibrate the other tests' p-values under the null.
KsResult ks_uniform(std::vector<double> values);

struct BinomialCi {
  double low = 0.0, high = 1.0;
};

// Wilson score interval for a success proportion.
BinomialCi binomial_ci(int64_t successes, int64_t trials, double z = 1.959963984540054);

// Exact one-sided binomial tail P[X >= k] for X ~ Binomial(n, p0).
double binomial_sf(int64_t k, int64_t n, double p0);

}  // namespace gesturelab
