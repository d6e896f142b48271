#include "aldous/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace aldous {

namespace {

inline std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9E3779B97F4A7C15ull;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

inline std::uint64_t rotl(std::uint64_t x, int k) {
  return (x << k) | (x >> (64 - k));
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id) {
  std::uint64_t x = seed;
  std::uint64_t h = splitmix64(x);
  x = h ^ (0xD1B54A32D192ED03ull * (stream_id + 1));
  for (int i = 0; i < 4; ++i) s_[i] = splitmix64(x);
  // xoshiro must not start from the all-zero state
  if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 0x2545F4914F6CDD1Dull;
}

std::uint64_t RngStream::next_u64() {
  const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double RngStream::uniform() {
  return (static_cast<double>(next_u64() >> 11) + 0.5) *
         (1.0 / 9007199254740992.0);
}

double RngStream::normal() {
  if (have_cached_normal_) {
    have_cached_normal_ = false;
    return cached_normal_;
  }
  double u1 = uniform();
  double u2 = uniform();
  double r = std::sqrt(-2.0 * std::log(u1));
  double theta = 6.283185307179586476925286766559 * u2;
  cached_normal_ = r * std::sin(theta);
  have_cached_normal_ = true;
  return r * std::cos(theta);
}

double RngStream::exponential(double rate) {
  if (rate <= 0.0) throw std::invalid_argument("exponential: rate <= 0");
  return -std::log(uniform()) / rate;
}

double RngStream::gamma(double shape, double rate) {
  if (shape <= 0.0 || rate <= 0.0)
    throw std::invalid_argument("gamma: nonpositive parameter");
  if (shape < 1.0) {
    // Boost: X_{a} = X_{a+1} * U^{1/a}
    double u = uniform();
    return gamma(shape + 1.0, rate) * std::pow(u, 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    double u = uniform();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v / rate;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v)))
      return d * v / rate;
  }
}

double RngStream::beta(double a, double b) {
  double x = gamma(a, 1.0);
  double y = gamma(b, 1.0);
  return x / (x + y);
}

std::vector<double> RngStream::dirichlet(const std::vector<double>& params) {
  if (params.empty()) throw std::invalid_argument("dirichlet: empty params");
  std::vector<double> out(params.size());
  double total = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i] <= 0.0)
      throw std::invalid_argument("dirichlet: nonpositive parameter");
    out[i] = gamma(params[i], 1.0);
    total += out[i];
  }
  for (double& v : out) v /= total;
  return out;
}

long RngStream::poisson(double mean) {
  if (mean < 0.0) throw std::invalid_argument("poisson: negative mean");
  long count = 0;
  // Additivity split keeps the Knuth product numerically safe.
  while (mean > 30.0) {
    double half = mean * 0.5;
    count += poisson(half);
    mean -= half;
  }
  double limit = std::exp(-mean);
  double prod = uniform();
  while (prod > limit) {
    ++count;
    prod *= uniform();
  }
  return count;
}

long RngStream::uniform_int(long n) {
  if (n <= 0) throw std::invalid_argument("uniform_int: n <= 0");
  // rejection to avoid modulo bias
  std::uint64_t un = static_cast<std::uint64_t>(n);
  std::uint64_t limit = UINT64_MAX - UINT64_MAX % un;
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return static_cast<long>(x % un);
}

}  // namespace aldous
