#pragma once
// Spindle fields: Poisson point measures of BESQ(-1) excursions, the
// compensated scaffolding, the skewer map, clades and type-1 point measures.
//
// A field stores each spindle together with its absolute birth level (the
// scaffolding value just before the spindle's jump), so that skewering and
// concatenation never have to re-derive levels.  Clades and first-passage
// descents end exactly at scaffolding level 0: downward movement is the
// continuous compensator drift, so first passage has no overshoot and
// concatenated fields line up exactly.

#include <vector>

#include "aldous/interval_partition.hpp"
#include "aldous/rng.hpp"

namespace aldous {

// First-passage shape of BESQ(5) from 0 to level 1, time-normalized to
// [0,1]; scaled by b (both axes) it is exactly the ascent of a height-b
// spindle.
struct RiseShape {
  std::vector<double> values;  // grid over normalized time [0,1]
  double duration = 0.0;       // passage time before normalization
  double end_value = 0.0;      // >= 1 (grid overshoot)
};

// BESQ(-1) decay from 1 to absorption on a normalized time grid, kept at
// natural value scale (interior of a long-lived decay is of the order of its
// duration).  Scaling values by c and times by c * duration is again an
// exact BESQ(-1) decay, which is how composite spindles realize an exactly
// sampled lifetime: pick the shape whose aspect is nearest to the sampled
// lifetime / start-value ratio, then scale both axes.
struct FallShape {
  std::vector<double> values;  // f(0) = 1, f(duration) = 0, normalized time
  double duration = 0.0;       // natural absorption time from start value 1
};

// A spindle is either an owned Euler path (broken spindles), a lazy
// height-mode composite (library ascent scaled by b, then a normalized
// decay shape stretched to an exactly sampled BESQ(-1) absorption time), or
// a lazy scaled full-excursion shape (lifetime mode).  Lazy spindles
// evaluate in O(1) without per-spindle path storage.
struct Spindle {
  double lifetime = 0.0;
  double broken_start = 0.0;  // > 0 for broken spindles

  // owned grid (values[i] at i*step), used when rise == full_shape == null
  std::vector<double> values;
  double step = 0.0;

  // height-mode composite
  const RiseShape* rise = nullptr;
  const FallShape* fall = nullptr;
  double height = 0.0;         // b
  double fall_scale = 0.0;     // value scale of the fall shape
  double fall_lifetime = 0.0;  // fall_start / (2G), G ~ Gamma(3/2,1)

  // lifetime-mode scaled full excursion (values normalized by lifetime)
  const std::vector<double>* full_shape = nullptr;

  // linear interpolation inside [0, lifetime], 0 outside
  double value_at(double h) const;
  double max_value() const;
};

enum class TruncationMode { height, lifetime };

struct Truncation {
  TruncationMode mode = TruncationMode::height;
  double parameter = 1e-3;
};

struct FieldPoint {
  double time = 0.0;
  double birth_level = 0.0;
  Spindle spindle;
};

struct SpindleField {
  std::vector<FieldPoint> points;  // sorted by time
  double length = 0.0;
  Truncation truncation;
  double compensator_rate = 0.0;
  double initial_level = 0.0;  // scaffolding start (descents begin above 0)

  // highest level any spindle reaches: max over points of birth + lifetime
  double max_level() const;
};

// Intensity of included spindles per unit time for the truncation mode:
// height b: (3/(2 sqrt(pi))) b^{-3/2}; lifetime eps: eps^{-3/2}/sqrt(2 pi).
double spindle_rate(const Truncation& t);

// Compensator slope of the scaffolding: rate x mean included lifetime,
// matched exactly to the samplers.  Lifetime mode: 3 eps^{-1/2}/(pi sqrt(2))
// (lifetimes are inverse-transform exact).  Height mode: rate x b x
// (mean ascent duration + mean ascent end value) over the ascent library;
// the decay time is fall_start/(2G) with E[1/(2G)] = 1, so the library
// means make the compensator exact for the composite sampler.
double compensator_rate(const Truncation& t, double step);

// The analytic height-mode slope (9/(5 sqrt(pi))) b^{-1/2}, the step -> 0
// limit of the calibrated value; exposed for tests.
double analytic_height_compensator(double b);

// Excursion conditioned to reach height b: BESQ(5) from 0 to first passage
// of b, then an independent BESQ_b(-1) to absorption.  max_lifetime > 0
// stops the decay phase at that duration; an unabsorbed spindle reports an
// infinite lifetime (it is only ever evaluated below the level cap).
Spindle sample_excursion_above(double b, double step, RngStream& rng,
                               double max_lifetime = 0.0);

// One spindle of the truncated excursion law (the per-jump sampler behind
// sample_prm_field), exposed for custom field builders.
Spindle sample_truncated_spindle(const Truncation& truncation, double step,
                                 RngStream& rng);

// Spindle of a given lifetime: a unit-lifetime squared Bessel bridge of
// dimension 5 (the exact law of the excursion conditioned on its lifetime)
// from a fixed library, BESQ-scaled (values and time both by the lifetime).
Spindle sample_spindle_with_lifetime(double lifetime, RngStream& rng);

// Poisson(rate x length) spindles at i.i.d. uniform times with birth levels
// from the compensated scaffolding.
SpindleField sample_prm_field(double length, const Truncation& truncation,
                              double step, RngStream& rng);

// Compensated scaffolding value: initial_level + sum of lifetimes of jumps
// at times <= t minus t x compensator_rate.
double scaffolding_value(const SpindleField& field, double t);

// Interval partition of spindle cross-sections at level y among points with
// time <= t: blocks in time order for spindles with birth < y < birth +
// lifetime, mass = spindle value at y - birth.  Left diversities via the
// finite-h estimator over the block prefix (h_div <= 0 picks the default
// 10 x truncation parameter).
IntervalPartition skewer(const SpindleField& field, double y, double t,
                         double h_div = -1.0);

// Broken spindle of initial mass x at time 0 followed by fresh PRM arrivals
// until the scaffolding first passes 0 (started at the broken lifetime).
//
// level_cap > 0 elides scaffolding excursions above that level: every
// spindle born during such an excursion has birth level >= cap and cannot
// straddle any level below it, and re-entry happens by continuous drift, so
// skewers at levels < cap (and death levels < cap) are exact while the
// heavy-tailed time spent high up is skipped.
SpindleField clade(double initial_mass, double step,
                   const Truncation& truncation, RngStream& rng,
                   double level_cap = 0.0);

// PRM arrivals with the scaffolding started at `height`, run to first
// passage of 0; the pre-0 part of type-0 evolutions.
SpindleField descent_field(double height, double step,
                           const Truncation& truncation, RngStream& rng,
                           double level_cap = 0.0);

// Concatenation of independent clades, one per block of `initial`.
SpindleField type1_point_measure(const IntervalPartition& initial, double step,
                                 const Truncation& truncation, RngStream& rng,
                                 double level_cap = 0.0);

// Append right's points after left (times shifted by left.length); both
// fields must start and end at scaffolding level 0 for levels to line up,
// except that left may be a descent (its initial_level is kept).
SpindleField concatenate_fields(const SpindleField& left,
                                const SpindleField& right);

}  // namespace aldous
