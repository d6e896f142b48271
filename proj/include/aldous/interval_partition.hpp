#pragma once
// Interval partitions with diversity.
//
// A partition is an ordered sequence of blocks; every block stores its mass
// and its left diversity.  Diversity is *stored*, never recomputed from
// masses: any finite partition has zero limit diversity, so the only honest
// source of diversity values is the construction that produced the partition
// (subordinator time, local-time proxies, ...).  The mass_deficit field
// carries the aggregate mass of discarded sub-threshold blocks of truncated
// infinite objects; it counts towards the total mass and towards the
// unmatched-mass terms of the metric, never towards matched pairs.

#include <string>
#include <vector>

namespace aldous {

struct Block {
  double mass = 0.0;
  double left_diversity = 0.0;
};

struct IntervalPartition {
  std::vector<Block> blocks;
  double total_diversity = 0.0;
  double mass_deficit = 0.0;
  // false for mass-only samplers (e.g. the GEM stick-breaking route)
  bool diversity_valid = true;

  double total_mass() const {
    double s = mass_deficit;
    for (const Block& b : blocks) s += b.mass;
    return s;
  }
  bool empty() const { return blocks.empty() && mass_deficit == 0.0; }

  std::string to_csv() const;
  static IntervalPartition from_csv(const std::string& text);
};

// Finite-h estimator of the diversity to the left of `position`:
// sqrt(pi) * sqrt(h) * #{blocks with mass > h ending at or left of position}.
double diversity_estimate(const IntervalPartition& p, double position,
                          double h);

IntervalPartition concatenate(const IntervalPartition& left,
                              const IntervalPartition& right);

IntervalPartition scale(const IntervalPartition& p, double c);

// Exact infimum over order-preserving correspondences of the distortion of
// Definition 2.2 (diversity discrepancies, total-diversity discrepancy,
// mass mismatch + unmatched mass).  Threshold scan over the candidate
// discrepancy values with a Pareto-front matching DP per threshold.
double dI_distance(const IntervalPartition& a, const IntervalPartition& b);

// Exhaustive minimum over all monotone correspondences; oracle for small
// partitions (exponential in the block counts).
double dI_distance_bruteforce(const IntervalPartition& a,
                              const IntervalPartition& b);

}  // namespace aldous
