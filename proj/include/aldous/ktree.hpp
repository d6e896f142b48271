#pragma once
// k-trees: binary tree shapes over label sets, top masses on leaf edges and
// interval partitions on internal edges, plus the operators that move
// between label sets (insertion, projection, swap-and-reduce, resampling)
// and the level-indexed killed / non-resampling / resampling evolutions
// assembled from independent type-0/1/2 compound evolutions.
//
// Label sets are bitmasks (bit j-1 = label j), so k <= 64.  A TreeShape
// stores the internal edges of the binary hierarchy (every non-singleton
// member, including the full label set); parent/sibling/uncle queries scan
// the edge list, which is kept sorted for canonical form.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "aldous/interval_partition.hpp"
#include "aldous/rng.hpp"
#include "aldous/stats.hpp"
#include "aldous/type_evolutions.hpp"

namespace aldous {

using LabelSet = std::uint64_t;

inline LabelSet label_bit(int j) { return LabelSet{1} << (j - 1); }

struct TreeShape {
  LabelSet labels = 0;          // the label set A
  std::vector<LabelSet> edges;  // internal edges incl. A itself, sorted

  int leaf_count() const;
  bool has_edge(LabelSet e) const;
  // smallest edge strictly containing `member` (an edge or a singleton);
  // 0 when member == labels (the root edge has no parent)
  LabelSet parent(LabelSet member) const;
  // the unique two-set split of an internal edge; members may be singletons
  std::pair<LabelSet, LabelSet> children(LabelSet edge) const;
  LabelSet sibling(LabelSet member) const;
  // 2 if the edge is a label pair, 1 if exactly one child is a singleton,
  // else 0
  int edge_type(LabelSet edge) const;
  // internal edges in depth-first order, children visited least-label first
  std::vector<LabelSet> depth_first_edges() const;

  void validate() const;  // throws std::logic_error on invariant violations
  std::string to_newick() const;

  bool operator==(const TreeShape& o) const {
    return labels == o.labels && edges == o.edges;
  }
};

// shape-level insertion t + (F, j): F an internal edge or a singleton
TreeShape shape_insert(const TreeShape& t, LabelSet f, int j);
// shape-level swap-and-reduce target J(t, i) = max{i, a, b} with a, b the
// least labels on the sibling and uncle of leaf i (b = 0 at the root)
int swap_target(const TreeShape& t, int i);
// swap labels i and j, then delete leaf j and contract its parent
TreeShape shape_swap_reduce(const TreeShape& t, int i);

// Either a top-mass block (label > 0) or a block of an edge partition.
struct BlockRef {
  int label = 0;
  LabelSet edge = 0;
  std::size_t index = 0;
};

struct KTree {
  TreeShape shape;
  std::map<int, double> top_masses;
  std::map<LabelSet, IntervalPartition> edge_partitions;

  double total_mass() const;
  std::vector<std::pair<BlockRef, double>> blocks() const;
  // the unique label i with x_i + ||beta_parent({i})|| = 0, or 0 if none
  int degenerate_label() const;
  void validate() const;
  std::string to_csv() const;
};

// uniform over the (2k-3)!! shapes via sequential uniform-edge insertion
TreeShape sample_uniform_shape(int k, RngStream& rng);

// uniform shape, Dirichlet(1/2,...,1/2) split over the k top masses and
// k-1 internal edges (depth-first edge order), independent PDIP(1/2,1/2)
// proportions inside each edge, all scaled to total_mass.  block_floor is
// the PDIP jump floor.
KTree sample_brownian_ktree(int k, double total_mass, double block_floor,
                            RngStream& rng);

// PDIP(1/2,1/2) proportions scaled to a prescribed total mass, keeping the
// effective block floor close to the requested one
IntervalPartition scaled_pdip(double mass, double block_floor, RngStream& rng);

// projection pi_{-j}; no-op when j is absent, throws when it is the last
// label
KTree project_drop(const KTree& tree, int j);
// pi_k = pi_{-(k+1)} o ... o pi_{-max}
KTree project_to(const KTree& tree, int k);

// T + (block, j, U) with U = (y1, y2, gamma) a unit-mass 2-tree; U is
// ignored for internal blocks
KTree insert_label(const KTree& tree, const BlockRef& block, int j, double y1,
                   double y2, const IntervalPartition& gamma);

// pick a block with probability ||block|| / ||T|| (mass deficits stay in
// the normalizer but are never selected), insert label j with an
// independent Brownian reduced 2-tree
KTree resampling_kernel(const KTree& tree, int j, double block_floor,
                        RngStream& rng);

struct SwapReduceResult {
  KTree tree;
  int caused_label = 0;   // I: the degenerate label
  int dropped_label = 0;  // J
  bool swapped = false;
};
// requires exactly one degenerate label
SwapReduceResult swap_and_reduce(const KTree& tree);

enum class EvolutionMode { killed, non_resampling, resampling };

struct KTreeEvent {
  enum class Kind { degeneration, resample } kind = Kind::degeneration;
  double level = 0.0;
  int caused_label = 0;
  int dropped_label = 0;
};

struct KTreeTrace {
  std::vector<double> levels;   // sorted ascending
  std::vector<KTree> snapshots; // zero-mass states have an empty label set
  std::vector<KTreeEvent> events;
  double extinction_level = 0.0;  // level at which the trace reaches mass 0

  std::string event_csv() const;
};

// Killed A-tree evolutions on the level grid: independent type-0/1/2
// compound evolutions per internal edge, degeneration at the first exact
// compound degeneration level; at degenerations killed -> zero state,
// non-resampling -> swap_and_reduce, resampling -> swap_and_reduce followed
// by the resampling kernel with the dropped label.
KTreeTrace run_ktree_evolution(const KTree& initial, EvolutionMode mode,
                               const std::vector<double>& levels, double step,
                               const Truncation& truncation, RngStream& rng);

// De-Poissonized trace: invert u(y) = integral of 1 / ||T^x|| dx (trapezoid
// on the trace's level grid) and emit normalized states on the u grid;
// events are mapped through the same time change.  u values beyond the
// covered range are dropped (u_covered reports the usable horizon).
struct UnitMassTrace {
  std::vector<double> times;
  std::vector<KTree> states;
  std::vector<KTreeEvent> events;
  double u_covered = 0.0;
};
UnitMassTrace depoissonize(const KTreeTrace& trace,
                           const std::vector<double>& u_grid);

// The (2k-1) coordinates ((x_j), (||beta_E||)) of a unit-mass trace on its
// u grid, with u rescaled by 4 and stopped at the first vanishing
// coordinate; coordinate order: top masses by label, then depth-first edges.
struct MassPath {
  std::vector<double> times;
  std::vector<std::vector<double>> values;  // one vector per time point
};
MassPath wright_fisher_projection(const UnitMassTrace& trace);

// Simulate a resampling k_upper evolution from the Lambda-extension of
// `lower`, project to k_lower at level y; simulate the lower evolution
// directly; KS-compare top mass of label 1, total partition mass, total
// partition diversity and total mass.
struct ConsistencyReport {
  TestReport top_mass;
  TestReport partition_mass;
  TestReport diversity;
  TestReport total_mass;
  bool all_pass() const;
};
ConsistencyReport consistency_check(int k_upper, int k_lower, double y,
                                    int n_replicates, double step,
                                    const Truncation& truncation,
                                    RngStream& rng);

}  // namespace aldous
