#include "aldous/stats.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace aldous {

// ---------------------------------------------------------------- special fns

namespace {

// series expansion of P(a,x), good for x < a+1
double gamma_p_series(double a, double x) {
  double ap = a;
  double sum = 1.0 / a;
  double del = sum;
  for (int i = 0; i < 500; ++i) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::fabs(del) < std::fabs(sum) * 1e-16) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// continued fraction for Q(a,x), good for x >= a+1 (modified Lentz)
double gamma_q_cf(double a, double x) {
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 500; ++i) {
    double an = -static_cast<double>(i) * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < 1e-16) break;
  }
  return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

}  // namespace

double reg_gamma_p(double a, double x) {
  if (a <= 0.0) throw std::invalid_argument("reg_gamma_p: a <= 0");
  if (x <= 0.0) return 0.0;
  if (x < a + 1.0) return gamma_p_series(a, x);
  return 1.0 - gamma_q_cf(a, x);
}

double reg_gamma_q(double a, double x) {
  if (a <= 0.0) throw std::invalid_argument("reg_gamma_q: a <= 0");
  if (x <= 0.0) return 1.0;
  if (x < a + 1.0) return 1.0 - gamma_p_series(a, x);
  return gamma_q_cf(a, x);
}

double gamma_cdf(double x, double shape, double rate) {
  if (x <= 0.0) return 0.0;
  return reg_gamma_p(shape, rate * x);
}

double chi_square_sf(double x, double df) {
  if (x <= 0.0) return 1.0;
  return reg_gamma_q(df / 2.0, x / 2.0);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double kolmogorov_sf(double lambda) {
  if (lambda < 1e-3) return 1.0;
  double sum = 0.0;
  double sign = 1.0;
  for (int k = 1; k <= 100; ++k) {
    double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += sign * term;
    sign = -sign;
    if (term < 1e-12) break;
  }
  double p = 2.0 * sum;
  if (p < 0.0) p = 0.0;
  if (p > 1.0) p = 1.0;
  return p;
}

double besq_m1_survival(double x, double y) {
  // zeta = x/(2G), G ~ Gamma(3/2,1); P(zeta > y) = P(G < x/2y)
  if (y <= 0.0) return 1.0;
  if (x <= 0.0) return 0.0;
  return reg_gamma_p(1.5, x / (2.0 * y));
}

double besq0_extinction(double x, double y) {
  if (y <= 0.0) return x <= 0.0 ? 1.0 : 0.0;
  return std::exp(-x / (2.0 * y));
}

// ---------------------------------------------------------------- reports

std::string TestReport::csv_header() {
  return "experiment,test,statistic,p_value,n,pass";
}

std::string TestReport::csv_row() const {
  std::ostringstream os;
  os.precision(12);
  os << experiment << ',' << test << ',' << statistic << ',' << p_value << ','
     << n << ',' << (pass ? 1 : 0);
  return os.str();
}

// ---------------------------------------------------------------- tests

TestReport ks_one_sample(std::vector<double> samples,
                         const std::function<double(double)>& cdf,
                         double alpha) {
  TestReport r;
  r.test = "ks_one_sample";
  r.n = samples.size();
  if (samples.empty()) return r;
  std::sort(samples.begin(), samples.end());
  double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    double f = cdf(samples[i]);
    d = std::max(d, std::fabs(f - static_cast<double>(i) / n));
    d = std::max(d, std::fabs(static_cast<double>(i + 1) / n - f));
  }
  double sn = std::sqrt(n);
  r.statistic = d;
  r.p_value = kolmogorov_sf((sn + 0.12 + 0.11 / sn) * d);
  r.pass = r.p_value > alpha;
  return r;
}

TestReport ks_two_sample(std::vector<double> a, std::vector<double> b,
                         double alpha) {
  TestReport r;
  r.test = "ks_two_sample";
  r.n = a.size() + b.size();
  if (a.empty() || b.empty()) return r;
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double na = static_cast<double>(a.size());
  double nb = static_cast<double>(b.size());
  double d = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::fabs(static_cast<double>(i) / na -
                              static_cast<double>(j) / nb));
  }
  double ne = std::sqrt(na * nb / (na + nb));
  r.statistic = d;
  r.p_value = kolmogorov_sf((ne + 0.12 + 0.11 / ne) * d);
  r.pass = r.p_value > alpha;
  return r;
}

TestReport chi_square_test(const std::vector<long>& counts,
                           std::vector<double> probs, double alpha) {
  TestReport r;
  r.test = "chi_square";
  if (counts.empty()) return r;
  long total = 0;
  for (long c : counts) total += c;
  r.n = static_cast<std::size_t>(total);
  if (probs.empty())
    probs.assign(counts.size(), 1.0 / static_cast<double>(counts.size()));
  if (probs.size() != counts.size())
    throw std::invalid_argument("chi_square_test: size mismatch");
  double stat = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    double expect = probs[i] * static_cast<double>(total);
    if (expect <= 0.0) throw std::invalid_argument("chi_square_test: p=0 cell");
    double diff = static_cast<double>(counts[i]) - expect;
    stat += diff * diff / expect;
  }
  r.statistic = stat;
  r.p_value = chi_square_sf(stat, static_cast<double>(counts.size() - 1));
  r.pass = r.p_value > alpha;
  return r;
}

DriftDiffusion drift_diffusion_estimate(const std::vector<double>& increments,
                                        double dt) {
  DriftDiffusion out;
  out.n = increments.size();
  if (increments.size() < 2 || dt <= 0.0) return out;
  double n = static_cast<double>(increments.size());
  double m1 = 0.0, m2 = 0.0;
  for (double dx : increments) {
    m1 += dx;
    m2 += dx * dx;
  }
  m1 /= n;
  m2 /= n;
  out.drift = m1 / dt;
  out.diffusion = m2 / dt;  // for small dt the drift^2*dt correction is negligible
  double var1 = 0.0, var2 = 0.0;
  for (double dx : increments) {
    var1 += (dx - m1) * (dx - m1);
    var2 += (dx * dx - m2) * (dx * dx - m2);
  }
  var1 /= n - 1.0;
  var2 /= n - 1.0;
  out.drift_se = std::sqrt(var1 / n) / dt;
  out.diffusion_se = std::sqrt(var2 / n) / dt;
  return out;
}

LinearFit linear_fit(const std::vector<double>& x,
                     const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("linear_fit: need >= 2 points");
  double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  LinearFit f;
  f.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  f.intercept = (sy - f.slope * sx) / n;
  return f;
}

double holder_exponent_estimate(const std::vector<double>& path_distances,
                                int max_lag_pow) {
  // path_distances: d(X_0, X_t) surrogate — we regress mean |increment| over
  // lag 2^j against the lag.
  if (path_distances.size() < 16)
    throw std::invalid_argument("holder_exponent_estimate: path too short");
  std::vector<double> logs_lag, logs_inc;
  for (int p = 0; p <= max_lag_pow; ++p) {
    std::size_t lag = static_cast<std::size_t>(1) << p;
    if (lag >= path_distances.size()) break;
    double acc = 0.0;
    std::size_t cnt = 0;
    for (std::size_t i = 0; i + lag < path_distances.size(); ++i) {
      acc += std::fabs(path_distances[i + lag] - path_distances[i]);
      ++cnt;
    }
    if (cnt == 0 || acc <= 0.0) continue;
    logs_lag.push_back(std::log(static_cast<double>(lag)));
    logs_inc.push_back(std::log(acc / static_cast<double>(cnt)));
  }
  return linear_fit(logs_lag, logs_inc).slope;
}

double sample_mean(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sample_variance(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  double m = sample_mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

}  // namespace aldous
