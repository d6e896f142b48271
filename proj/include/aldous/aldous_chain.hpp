#pragma once
// The discrete side: rooted binary leaf-labeled trees, the label-swapping
// down-up chain, decorated k-tree projections, Poissonized ordered Chinese
// restaurants, and the exponential-clock embedding of the chain.

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "aldous/ktree.hpp"
#include "aldous/rng.hpp"
#include "aldous/rtree_metrics.hpp"

namespace aldous {

// Planted rooted binary tree with labeled leaves.  Vertex 0 is the root and
// has exactly one child; every other internal vertex has two children.  A
// tree with n leaves has 2n vertices and 2n - 1 edges, one per non-root
// vertex (the edge towards its parent); edges are addressed by their lower
// vertex.
struct LabeledTree {
  std::vector<int> parent;                 // [0] == -1
  std::vector<std::array<int, 2>> child;   // -1 entries for leaves
  std::vector<int> label;                  // per vertex; 0 for non-leaves
  std::vector<int> leaf_vertex;            // [label] -> vertex; [0] unused

  int leaf_count() const { return (int)leaf_vertex.size() - 1; }
  bool is_leaf(int v) const { return child[v][0] < 0; }
  int sibling(int v) const;
  int least_label_in_subtree(int v) const;
  int subtree_leaf_count(int v) const;
  void validate() const;
  // leaf-labeled shape key, invariant under vertex renumbering
  std::string shape_key() const;
  std::string to_newick() const;
};

// single leaf (n = 1): root - leaf
LabeledTree singleton_tree();
// uniform tree on n labeled leaves by uniform edge growth
LabeledTree sample_uniform_tree(int n, RngStream& rng);

struct ChainEvent {
  int i = 0;        // leaf picked by the down-move
  int i_tilde = 0;  // max{i, a, b}: the label deleted and regrown
  int insertion_edge = 0;  // index into the reduced tree's edge list
};

// One down-up move of the label-swapping chain (leaf-label dynamics of the
// plain chain are modified, the unlabeled transition is untouched).
// Throws std::domain_error for n < 3.
ChainEvent modified_chain_step(LabeledTree& tree, RngStream& rng);

// Decorated k-tree: spanned shape, leaf counts of the top subtrees, and the
// leaf counts of the subtrees grafted along each internal path, ordered by
// decreasing distance from the root.
struct DecoratedKTree {
  TreeShape shape;
  std::map<int, int> external;                     // label -> weight
  std::map<LabelSet, std::vector<int>> internal_seq;
  int total_weight() const;
  bool operator==(const DecoratedKTree& o) const {
    return shape == o.shape && external == o.external &&
           internal_seq == o.internal_seq;
  }
};

DecoratedKTree decorated_projection(const LabeledTree& tree, int k);
// further projection of a decorated k-tree to j <= k labels, consistent
// with projecting the underlying tree directly
DecoratedKTree decorated_reduce(const DecoratedKTree& t, int j);

// ---------------------------------------------------------------- oCRP

struct OcrpState {
  std::vector<long> tables;  // left-to-right populations
  double alpha = 0.5;
  double theta = -0.5;  // in {1/2, 0, -1/2}

  long total() const;
  void validate() const;
};

struct OcrpStep {
  double dt = 0.0;  // exponential holding time of the executed event
  enum class Kind { death, birth, new_table } kind = Kind::death;
  int table = -1;  // affected table index (post-event for new tables)
};

// One Gillespie event of the Poissonized down-up oCRP: each table of size m
// dies at rate m and grows at rate m - alpha; a new singleton table appears
// to the right of each eligible table at rate alpha (for theta = -1/2 the
// slot between the two leftmost tables is closed) and at the far left at
// rate theta when theta > 0.
OcrpStep ocrp_poissonized_step(OcrpState& state, RngStream& rng);

// ---------------------------------------------- continuous-time embedding

// Default rate of the embedded chain on n leaves.
inline double chain_rate(int n) { return double(n) * (2.0 * n - 3.0); }

struct ChainPath {
  std::vector<double> times;
  std::vector<ChainEvent> events;
  LabeledTree final_tree;
  std::string event_csv() const;
};

// Modified-chain steps at Exponential(rate) spacings up to `horizon`.
ChainPath continuous_chain(const LabeledTree& initial, double rate,
                           double horizon, RngStream& rng);

}  // namespace aldous
