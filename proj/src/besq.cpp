#include "aldous/besq.hpp"

#include <cmath>
#include <stdexcept>

namespace aldous {

double BesqPath::value_at(double y) const {
  if (y <= 0.0) return values.empty() ? initial_mass : values.front();
  if (absorbed() && y >= lifetime) return 0.0;
  double pos = y / step;
  std::size_t i = static_cast<std::size_t>(pos);
  if (i + 1 >= values.size()) {
    if (absorbed()) return 0.0;
    return values.empty() ? initial_mass : values.back();
  }
  double frac = pos - static_cast<double>(i);
  return values[i] * (1.0 - frac) + values[i + 1] * frac;
}

namespace {

BesqPath besq_run(double dimension, double initial_mass, double step,
                  double horizon, bool to_absorption, RngStream& rng) {
  if (step <= 0.0) throw std::invalid_argument("besq: step <= 0");
  if (!to_absorption && step > horizon)
    throw std::invalid_argument("besq: step > horizon");
  if (initial_mass < 0.0)
    throw std::invalid_argument("besq: negative initial mass");
  if (to_absorption && dimension > 0.0)
    throw std::invalid_argument("besq: absorption run needs delta <= 0");

  BesqPath p;
  p.dimension = dimension;
  p.initial_mass = initial_mass;
  p.step = step;
  const double sqrt_step = std::sqrt(step);
  const double drift = dimension * step;
  double z = initial_mass;
  p.values.push_back(z);
  std::size_t max_steps = to_absorption
                              ? static_cast<std::size_t>(-1)
                              : static_cast<std::size_t>(horizon / step + 0.5);
  for (std::size_t i = 0; to_absorption || i < max_steps; ++i) {
    if (z <= 0.0 && dimension <= 0.0) {
      p.lifetime = static_cast<double>(i) * step;
      break;
    }
    z += drift + 2.0 * std::sqrt(z) * sqrt_step * rng.normal();
    if (z < 0.0) z = 0.0;
    p.values.push_back(z);
  }
  if (!p.absorbed() && p.values.back() <= 0.0 && dimension <= 0.0)
    p.lifetime = static_cast<double>(p.values.size() - 1) * step;
  return p;
}

}  // namespace

BesqPath besq_simulate(double dimension, double initial_mass, double step,
                       double horizon, RngStream& rng) {
  return besq_run(dimension, initial_mass, step, horizon, false, rng);
}

BesqPath besq_simulate_to_absorption(double dimension, double initial_mass,
                                     double step, RngStream& rng) {
  return besq_run(dimension, initial_mass, step, 0.0, true, rng);
}

double besq_lifetime_exact(double initial_mass, RngStream& rng) {
  if (initial_mass <= 0.0)
    throw std::invalid_argument("besq_lifetime_exact: initial mass <= 0");
  return initial_mass / (2.0 * rng.gamma(1.5, 1.0));
}

BesqPath besq5_first_passage(double threshold, double step, RngStream& rng) {
  if (threshold <= 0.0)
    throw std::invalid_argument("besq5_first_passage: threshold <= 0");
  if (step <= 0.0) throw std::invalid_argument("besq5_first_passage: step <= 0");
  // passage is a.s. finite with mean threshold/5; the cap only guards
  // against runaway loops and triggers a resample
  const std::size_t cap =
      static_cast<std::size_t>(threshold / step * 1000.0) + 1000000;
  for (int attempt = 0; attempt < 100; ++attempt) {
    BesqPath p;
    p.dimension = 5.0;
    p.initial_mass = 0.0;
    p.step = step;
    const double sqrt_step = std::sqrt(step);
    const double drift = 5.0 * step;
    double z = 0.0;
    p.values.push_back(z);
    for (std::size_t i = 0; i < cap; ++i) {
      z += drift + 2.0 * std::sqrt(z) * sqrt_step * rng.normal();
      if (z < 0.0) z = 0.0;
      p.values.push_back(z);
      if (z >= threshold) return p;
    }
  }
  throw std::runtime_error("besq5_first_passage: cap exceeded repeatedly");
}

}  // namespace aldous
