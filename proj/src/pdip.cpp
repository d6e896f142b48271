#include "aldous/pdip.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace aldous {

PdipSample sample_pdip_subordinator(double lambda, double jump_floor,
                                    RngStream& rng) {
  if (lambda <= 0.0 || jump_floor <= 0.0)
    throw std::invalid_argument("sample_pdip_subordinator: bad parameters");
  const double threshold = rng.exponential(lambda);
  const double jump_rate = 1.0 / (std::sqrt(jump_floor) * std::sqrt(M_PI));
  const double drift_rate = std::sqrt(jump_floor / M_PI);

  PdipSample out;
  double s = 0.0;     // subordinator (local) time
  double mass = 0.0;  // cumulative mass including drift
  for (;;) {
    double wait = rng.exponential(jump_rate);
    double drift_gain = drift_rate * wait;
    if (mass + drift_gain >= threshold) {
      // crossing happens inside the drift segment
      double partial = threshold - mass;
      out.partition.mass_deficit += partial;
      s += partial / drift_rate;
      break;
    }
    mass += drift_gain;
    out.partition.mass_deficit += drift_gain;
    s += wait;
    double u = rng.uniform();
    double jump = jump_floor / (u * u);
    if (mass + jump > threshold) break;  // crossing jump is excluded
    out.partition.blocks.push_back({jump, s});
    mass += jump;
  }
  out.partition.total_diversity = s;
  out.gamma_mass = out.partition.total_mass();
  return out;
}

IntervalPartition sample_pdip_gem(int n_blocks, RngStream& rng) {
  if (n_blocks < 1)
    throw std::invalid_argument("sample_pdip_gem: n_blocks < 1");
  std::vector<std::pair<double, double>> marked;  // (uniform mark, mass)
  marked.reserve(static_cast<std::size_t>(n_blocks));
  double residual = 1.0;
  for (int n = 1; n <= n_blocks; ++n) {
    double v = rng.beta(0.5, 0.5 * static_cast<double>(n + 1));
    marked.emplace_back(rng.uniform(), residual * v);
    residual *= 1.0 - v;
  }
  std::sort(marked.begin(), marked.end());
  IntervalPartition p;
  p.diversity_valid = false;
  p.mass_deficit = residual;
  for (const auto& [mark, m] : marked) p.blocks.push_back({m, 0.0});
  return p;
}

}  // namespace aldous
