#pragma once
// Poisson-Dirichlet (1/2,1/2) interval partition samplers.

#include "aldous/interval_partition.hpp"
#include "aldous/rng.hpp"

namespace aldous {

struct PdipSample {
  IntervalPartition partition;
  double gamma_mass = 0.0;  // total mass of the partition, Gamma(1/2,lambda)
};

// Jumps of a Stable(1/2) subordinator (Laplace exponent sqrt(theta), Levy
// density x^{-3/2}/(2 sqrt(pi))) above `jump_floor`, stopped strictly before
// the cumulative mass crosses an independent Exponential(lambda) threshold.
// Block left-diversities are the exact elapsed subordinator times; small-jump
// mass accrues into mass_deficit at the compensator rate sqrt(floor/pi).
PdipSample sample_pdip_subordinator(double lambda, double jump_floor,
                                    RngStream& rng);

// First n stick-breaking masses of PD(1/2,1/2) (residual fractions
// V_n ~ Beta(1/2,(n+1)/2)) placed in exchangeable order by uniform marks.
// Unit total mass; residual goes to mass_deficit; mass-only (no diversities).
IntervalPartition sample_pdip_gem(int n_blocks, RngStream& rng);

}  // namespace aldous
