#pragma once
// Weighted R-tree representations of k-trees and correspondence-based
// Gromov-Hausdorff(-Prokhorov) upper bounds.
//
// Branch lengths are diversities, never masses: the R-tree image of a k-tree
// realizes every internal edge E as a segment of length equal to the total
// diversity of beta_E, with the blocks of beta_E sitting on the segment as
// atoms and the branch point b_E at the leaf-side end.

#include <map>
#include <string>
#include <vector>

#include "aldous/interval_partition.hpp"
#include "aldous/ktree.hpp"

namespace aldous {

// Atoms sitting at the same point are kept as separate entries so that
// coincidences (ternary branch points, top masses at a shared leaf
// position) remain detectable; sum on demand.
struct MmtAtom {
  int vertex = -1;    // atom sits on the edge above this vertex
  double offset = 0;  // distance from `vertex` towards the root; 0 = at it
  double mass = 0.0;
};

struct MetricMeasureTree {
  // vertex 0 is the root; parent[0] == -1
  std::vector<int> parent;
  std::vector<double> edge_length;  // towards parent; [0] unused
  std::vector<MmtAtom> atoms;
  std::map<LabelSet, int> special;  // internal edge -> its branch point b_E
  std::map<int, int> leaf_vertex;   // label -> vertex carrying the top atom

  double depth(int v) const;
  double distance(int u, int v) const;
  double total_length() const;
  double total_atom_mass() const;
  // (id, parent_id, edge_length) rows followed by an atom table
  std::string to_csv() const;
};

// R-tree image S_k of a k-tree: one branch per internal edge, rooted by the
// W_k recursion (the root edge grows from the root, every other edge from
// its parent's branch point); blocks of beta_E become atoms at distance
// D(beta_E) - D_beta(U) from the bottom of the branch, top masses become
// atoms at the branch point of the parent edge.
// Throws std::invalid_argument when a partition lacks diversity annotations.
MetricMeasureTree build_Sk(const KTree& tree);

// Uniform combinatorial R-tree of a labeled discrete tree: every edge gets
// length 1/sqrt(n) and every leaf an atom of mass 1/n.  Declared here, fed
// by the chain module (which owns LabeledTree).
struct LabeledTree;
MetricMeasureTree rescaled_rtree(const LabeledTree& tree);

// Half the distortion of the correspondence that matches roots, matches the
// branch points b_E of equal internal-edge labels and interpolates linearly
// along corresponding branches.  The distortion of interpolated pairs is a
// convex combination of vertex distortions, so the supremum is attained at
// special vertices and the bound is computed exactly from the two
// branch-length vectors.  Throws on shape mismatch.
double gh_upper_same_shape(const MetricMeasureTree& a,
                           const MetricMeasureTree& b);

// Block matchings per internal edge: index pairs into the two partitions'
// block vectors, order-preserving (as produced by a d_I correspondence).
using BlockMatching = std::map<LabelSet, std::vector<std::pair<int, int>>>;

// GHP upper bound for k = 2, 3: the special-vertex correspondence extended
// by the matched atom pairs (top atoms matched by label); the result is
// max(distortion / 2, unmatched atom mass on either side).  k >= 4 needs
// the full branch-type taxonomy and is rejected.
double ghp_upper_k2_k3(const KTree& a, const KTree& b,
                       const BlockMatching& matching);

// Interval-partition image of the reduced {i, j} 2-tree:
// (0, x_i) * (0, x_j) * beta, where the 2-tree is the projection dropping
// every other label, so beta concatenates the spine partitions with the
// dropped subtrees folded into single (diversity-free) blocks.
IntervalPartition pairwise_projection(const KTree& tree, int i, int j);

}  // namespace aldous
