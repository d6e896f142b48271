#pragma once
// Type-0, type-1 and type-2 interval-partition evolutions as level-indexed
// processes built on spindle fields, with degeneration detection and the
// closed-form type-1 transition-kernel oracle.

#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "aldous/interval_partition.hpp"
#include "aldous/rng.hpp"
#include "aldous/scaffolding.hpp"

namespace aldous {

struct Type2State {
  double m1 = 0.0;
  double m2 = 0.0;
  IntervalPartition beta;
  int regime_parity = 1;  // label whose top mass carries the BESQ(-1) clock
  long regime_count = 0;

  double total_mass() const { return m1 + m2 + beta.total_mass(); }
};

struct EvolutionTrace {
  std::vector<double> levels;  // query levels, stored sorted ascending
  std::vector<Type2State> states;  // type-0 uses beta only; type-1 uses m1+beta
  double degeneration_level = std::numeric_limits<double>::infinity();
  double lifetime = std::numeric_limits<double>::infinity();
  // type-2 only: which top label outlives degeneration and with what mass
  int surviving_label = 0;
  double surviving_mass = 0.0;

  bool degenerate() const {
    return degeneration_level < std::numeric_limits<double>::infinity();
  }
  std::string to_csv() const;
};

// Skewer trace of a first-passage descent from above max(levels)
// concatenated with the type-1 point measure of `initial`; never
// degenerates.
EvolutionTrace run_type0(const IntervalPartition& initial,
                         const std::vector<double>& levels, double step,
                         const Truncation& truncation, RngStream& rng);

// Skewer trace of clade(initial_top) then the point measure of
// initial_partition; m1 = leftmost skewer block, beta = the rest.
// Degenerates (and dies) at the field's death level.
EvolutionTrace run_type1(double initial_top,
                         const IntervalPartition& initial_partition,
                         const std::vector<double>& levels, double step,
                         const Truncation& truncation, RngStream& rng);

// Regime-alternating construction: a BESQ(-1) clock path on one top mass
// and a type-1 evolution on (other top, beta); regimes switch at the
// clock's absorption, degeneration happens when the type-1 side hits
// (0, empty) during a regime, and the clock then runs alone to absorption.
EvolutionTrace run_type2(const Type2State& initial,
                         const std::vector<double>& levels, double step,
                         const Truncation& truncation, RngStream& rng);

// Two independent type-1 evolutions spliced along the alternating
// first-passage recursion; same trace contract as run_type2.  The initial
// state is (m1, m2, beta) with the partition attached to side 1; side 2
// gets an independent Gamma(1/2, lambda)-scaled PDIP partition, as the
// construction requires, so `lambda` should match the law of `beta`.
EvolutionTrace run_type2_interweaving(const Type2State& initial, double lambda,
                                      const std::vector<double>& levels,
                                      double step, const Truncation& truncation,
                                      RngStream& rng);

// Closed-form marginal of the type-1 transition kernel at level y from a
// single block of mass b, with r = 1/(2y): P(empty) = e^{-br}, the
// Gamma(1/2, r) scale of the PDIP remainder, and the Laplace transform of
// the leftmost block mass at each probe lambda.
struct Type1Kernel {
  double empty_prob = 0.0;
  double gamma_rate = 0.0;
  std::vector<double> laplace_values;
};
Type1Kernel kernel_type1_marginal(double block_mass, double y,
                                  const std::vector<double>& probe_lambdas);

struct DegenerationStats {
  double level = 0.0;
  int surviving_label = 0;
  double surviving_mass = 0.0;
};
std::optional<DegenerationStats> degeneration_statistics(
    const EvolutionTrace& trace);

// Pseudo-stationary initial laws at rate lambda: type-1 is
// (Gamma(1/2,lambda) top, independent Gamma(1/2,lambda)-scaled PDIP);
// type-2 adds a second independent Gamma(1/2,lambda) top (equivalently a
// Gamma(3/2,lambda) total split by Dirichlet(1/2,1/2,1/2)).
std::pair<double, IntervalPartition> sample_pseudo_stationary_type1(
    double lambda, double block_floor, RngStream& rng);
Type2State sample_pseudo_stationary_type2(double lambda, double block_floor,
                                          RngStream& rng);

}  // namespace aldous
