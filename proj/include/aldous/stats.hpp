#pragma once
// Hypothesis tests and estimators used by the unit tests, the acceptance
// suite and the experiment CLI: Kolmogorov-Smirnov (one/two sample),
// chi-square goodness of fit, local drift/diffusion regression, and a
// log-log Hoelder exponent estimate.  Also the special functions the
// distributional oracles need (regularized incomplete gamma etc.).

#include <functional>
#include <string>
#include <vector>

namespace aldous {

// ---------------------------------------------------------------- special fns

// Regularized lower incomplete gamma P(a,x); Q(a,x) = 1 - P(a,x).
double reg_gamma_p(double a, double x);
double reg_gamma_q(double a, double x);

double gamma_cdf(double x, double shape, double rate);
double chi_square_sf(double x, double df);
double normal_cdf(double x);

// P(Kolmogorov statistic > lambda), the asymptotic KS tail.
double kolmogorov_sf(double lambda);

// Survival probability of BESQ_x(-1) beyond level y: P(zeta > y) with
// zeta = x/2G, G ~ Gamma(3/2,1).
double besq_m1_survival(double x, double y);

// Extinction probability of BESQ_x(0) by level y: exp(-x/2y).
double besq0_extinction(double x, double y);

// ---------------------------------------------------------------- reports

struct TestReport {
  std::string experiment;
  std::string test;
  double statistic = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;
  bool pass = false;
  std::string detail;

  std::string csv_row() const;
  static std::string csv_header();
};

// ---------------------------------------------------------------- tests

TestReport ks_one_sample(std::vector<double> samples,
                         const std::function<double(double)>& cdf,
                         double alpha = 0.01);

TestReport ks_two_sample(std::vector<double> a, std::vector<double> b,
                         double alpha = 0.01);

// counts vs expected probabilities (uniform if probs empty)
TestReport chi_square_test(const std::vector<long>& counts,
                           std::vector<double> probs = {},
                           double alpha = 0.001);

struct DriftDiffusion {
  double drift = 0.0;
  double drift_se = 0.0;
  double diffusion = 0.0;
  double diffusion_se = 0.0;
  std::size_t n = 0;
};

// Increment-based estimate: values x_t on an equally spaced grid with
// spacing dt; drift = mean(dx)/dt, diffusion = mean(dx^2)/dt.
DriftDiffusion drift_diffusion_estimate(const std::vector<double>& increments,
                                        double dt);

// Log-log regression of p-mean increment size against dyadic lag.
// values: path on an equally spaced grid.  Returns the slope (exponent).
double holder_exponent_estimate(const std::vector<double>& path_distances,
                                int max_lag_pow = 6);

// Least squares slope/intercept helper.
struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
};
LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y);

double sample_mean(const std::vector<double>& v);
double sample_variance(const std::vector<double>& v);

}  // namespace aldous
