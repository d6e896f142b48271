#pragma once
// Seeded random streams and elementary samplers.
//
// All distribution samplers are implemented here rather than taken from
// <random> so that a given (seed, stream_id) pair yields bitwise-identical
// sample sequences on every platform.  The generator is xoshiro256++ with
// SplitMix64 state initialization; distinct stream ids give statistically
// independent streams, which is what the replicate-level parallelism relies
// on.

#include <cstdint>
#include <vector>

namespace aldous {

class RngStream {
 public:
  RngStream() : RngStream(0, 0) {}
  RngStream(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  std::uint64_t next_u64();

  // Uniform on the open interval (0,1); never returns 0 or 1.
  double uniform();
  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  // Standard normal via Box-Muller (second variate cached).
  double normal();

  double exponential(double rate);

  // Gamma(shape, rate) with mean shape/rate.  Marsaglia-Tsang squeeze for
  // shape >= 1, boosted by U^{1/shape} below 1.
  double gamma(double shape, double rate);

  double beta(double a, double b);

  std::vector<double> dirichlet(const std::vector<double>& params);

  // Exact Poisson draw; O(mean) time (mean splitting for large means).
  long poisson(double mean);

  long uniform_int(long n);  // uniform on {0, ..., n-1}

 private:
  std::uint64_t s_[4];
  std::uint64_t seed_, stream_id_;
  double cached_normal_ = 0.0;
  bool have_cached_normal_ = false;
};

}  // namespace aldous
