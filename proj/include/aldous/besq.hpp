#pragma once
// Squared Bessel path simulation.
//
// The SDE dZ(y) = delta dy + 2 sqrt(Z(y)) dB(y) is integrated by
// Euler-Maruyama with clipping at 0 and, for delta <= 0, absorption at 0.
// The BESQ(-1) absorption time also has an exact sampler (x/2G with
// G ~ Gamma(3/2,1)) used as a bias-free oracle and for the type-2 clocks'
// lifetimes where no path is needed.

#include <limits>
#include <vector>

#include "aldous/rng.hpp"

namespace aldous {

struct BesqPath {
  double dimension = 0.0;
  double initial_mass = 0.0;
  double step = 0.0;
  // values[i] = Z(i*step); empty paths are not produced
  std::vector<double> values;
  // first grid time absorbed at 0 (delta <= 0), or +inf
  double lifetime = std::numeric_limits<double>::infinity();

  bool absorbed() const {
    return lifetime < std::numeric_limits<double>::infinity();
  }
  // linear interpolation; 0 beyond the stored grid when absorbed, last value
  // otherwise
  double value_at(double y) const;
};

// Path on [0, horizon] (shorter if absorbed first).
BesqPath besq_simulate(double dimension, double initial_mass, double step,
                       double horizon, RngStream& rng);

// Path of BESQ(delta) run until absorption (delta <= 0 required).
BesqPath besq_simulate_to_absorption(double dimension, double initial_mass,
                                     double step, RngStream& rng);

// Exact BESQ(-1) absorption time: x/(2G), G ~ Gamma(3/2, 1).
double besq_lifetime_exact(double initial_mass, RngStream& rng);

// BESQ(5) from 0 run to the first grid time its value >= threshold.
BesqPath besq5_first_passage(double threshold, double step, RngStream& rng);

}  // namespace aldous
