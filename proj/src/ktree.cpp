#include "aldous/ktree.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "aldous/besq.hpp"
#include "aldous/pdip.hpp"

namespace aldous {

namespace {

int popcount(LabelSet s) { return std::popcount(s); }
int least_label(LabelSet s) { return std::countr_zero(s) + 1; }

}  // namespace

// ------------------------------------------------------------------ TreeShape

int TreeShape::leaf_count() const { return popcount(labels); }

bool TreeShape::has_edge(LabelSet e) const {
  return std::binary_search(edges.begin(), edges.end(), e);
}

LabelSet TreeShape::parent(LabelSet member) const {
  LabelSet best = 0;
  for (LabelSet e : edges)
    if (e != member && (e & member) == member &&
        (best == 0 || popcount(e) < popcount(best)))
      best = e;
  return best;
}

std::pair<LabelSet, LabelSet> TreeShape::children(LabelSet edge) const {
  if (popcount(edge) < 2)
    throw std::logic_error("children: not an internal edge");
  // largest internal edge strictly inside `edge` is one child; by
  // laminarity its complement within `edge` is the other member
  LabelSet c1 = 0;
  for (LabelSet e : edges)
    if (e != edge && (edge & e) == e && popcount(e) > popcount(c1)) c1 = e;
  if (c1 == 0) {
    // a pair of leaves
    LabelSet a = LabelSet{1} << std::countr_zero(edge);
    return {a, edge ^ a};
  }
  return {c1, edge ^ c1};
}

LabelSet TreeShape::sibling(LabelSet member) const {
  LabelSet p = parent(member);
  if (p == 0) return 0;
  auto [c1, c2] = children(p);
  return c1 == member ? c2 : c1;
}

int TreeShape::edge_type(LabelSet edge) const {
  auto [c1, c2] = children(edge);
  int singles = (popcount(c1) == 1) + (popcount(c2) == 1);
  return singles;
}

std::vector<LabelSet> TreeShape::depth_first_edges() const {
  std::vector<LabelSet> out;
  if (popcount(labels) < 2) return out;
  std::vector<LabelSet> stack = {labels};
  while (!stack.empty()) {
    LabelSet e = stack.back();
    stack.pop_back();
    out.push_back(e);
    auto [c1, c2] = children(e);
    if (least_label(c1) > least_label(c2)) std::swap(c1, c2);
    // push in reverse so the least-label child is visited first
    if (popcount(c2) >= 2) stack.push_back(c2);
    if (popcount(c1) >= 2) stack.push_back(c1);
  }
  return out;
}

void TreeShape::validate() const {
  int k = popcount(labels);
  if (k == 0) {
    if (!edges.empty()) throw std::logic_error("shape: edges without labels");
    return;
  }
  if (static_cast<int>(edges.size()) != k - 1)
    throw std::logic_error("shape: edge count != #labels - 1");
  if (k >= 2 && !has_edge(labels))
    throw std::logic_error("shape: label set not an edge");
  if (!std::is_sorted(edges.begin(), edges.end()))
    throw std::logic_error("shape: edges not sorted");
  for (LabelSet e : edges) {
    if (popcount(e) < 2) throw std::logic_error("shape: singleton edge");
    if ((e & labels) != e) throw std::logic_error("shape: edge outside A");
    for (LabelSet f : edges)
      if ((e & f) != 0 && (e & f) != e && (e & f) != f)
        throw std::logic_error("shape: laminarity violated");
    children(e);  // throws if the two-set split is missing
  }
}

namespace {

std::string newick_member(const TreeShape& t, LabelSet m) {
  if (popcount(m) == 1) return std::to_string(least_label(m));
  auto [c1, c2] = t.children(m);
  if (least_label(c1) > least_label(c2)) std::swap(c1, c2);
  return "(" + newick_member(t, c1) + "," + newick_member(t, c2) + ")";
}

}  // namespace

std::string TreeShape::to_newick() const {
  if (labels == 0) return ";";
  return newick_member(*this, labels) + ";";
}

TreeShape shape_insert(const TreeShape& t, LabelSet f, int j) {
  if (t.labels & label_bit(j))
    throw std::invalid_argument("shape_insert: duplicate label");
  TreeShape out;
  out.labels = t.labels | label_bit(j);
  out.edges.reserve(t.edges.size() + 1);
  for (LabelSet e : t.edges)
    out.edges.push_back((f & e) == f && e != f ? e | label_bit(j) : e);
  out.edges.push_back(f | label_bit(j));
  std::sort(out.edges.begin(), out.edges.end());
  return out;
}

int swap_target(const TreeShape& t, int i) {
  LabelSet leaf = label_bit(i);
  LabelSet sib = t.sibling(leaf);
  if (sib == 0) throw std::invalid_argument("swap_target: single-leaf shape");
  int a = least_label(sib);
  LabelSet p = t.parent(leaf);
  LabelSet uncle = t.sibling(p);
  int b = uncle == 0 ? 0 : least_label(uncle);
  return std::max({i, a, b});
}

namespace {

// delete label i, then rename j -> i (the edge map behind swap-and-reduce)
LabelSet swap_reduce_mask(LabelSet e, int i, int j) {
  e &= ~label_bit(i);
  if (e & label_bit(j)) e = (e & ~label_bit(j)) | label_bit(i);
  return e;
}

}  // namespace

TreeShape shape_swap_reduce(const TreeShape& t, int i) {
  int j = swap_target(t, i);
  LabelSet p = t.parent(label_bit(i));
  TreeShape out;
  out.labels = swap_reduce_mask(t.labels, i, j);
  for (LabelSet e : t.edges)
    if (e != p) out.edges.push_back(swap_reduce_mask(e, i, j));
  std::sort(out.edges.begin(), out.edges.end());
  return out;
}

// ---------------------------------------------------------------------- KTree

double KTree::total_mass() const {
  double s = 0.0;
  for (const auto& [label, x] : top_masses) s += x;
  for (const auto& [e, beta] : edge_partitions) s += beta.total_mass();
  return s;
}

std::vector<std::pair<BlockRef, double>> KTree::blocks() const {
  std::vector<std::pair<BlockRef, double>> out;
  for (const auto& [label, x] : top_masses) {
    BlockRef r;
    r.label = label;
    out.push_back({r, x});
  }
  for (LabelSet e : shape.depth_first_edges()) {
    const IntervalPartition& beta = edge_partitions.at(e);
    for (std::size_t i = 0; i < beta.blocks.size(); ++i) {
      BlockRef r;
      r.edge = e;
      r.index = i;
      out.push_back({r, beta.blocks[i].mass});
    }
  }
  return out;
}

int KTree::degenerate_label() const {
  for (const auto& [label, x] : top_masses) {
    double pm = 0.0;
    LabelSet p = shape.parent(label_bit(label));
    if (p != 0) pm = edge_partitions.at(p).total_mass();
    if (x + pm <= 0.0) return label;
  }
  return 0;
}

void KTree::validate() const {
  shape.validate();
  if (static_cast<int>(top_masses.size()) != shape.leaf_count())
    throw std::logic_error("ktree: top mass count mismatch");
  for (const auto& [label, x] : top_masses) {
    if (!(shape.labels & label_bit(label)))
      throw std::logic_error("ktree: top mass for unknown label");
    if (x < 0.0) throw std::logic_error("ktree: negative top mass");
  }
  if (edge_partitions.size() != shape.edges.size())
    throw std::logic_error("ktree: partition count mismatch");
  for (const auto& [e, beta] : edge_partitions)
    if (!shape.has_edge(e))
      throw std::logic_error("ktree: partition on unknown edge");
  int degenerate = 0;
  for (const auto& [label, x] : top_masses) {
    LabelSet p = shape.parent(label_bit(label));
    double pm = p == 0 ? 0.0 : edge_partitions.at(p).total_mass();
    if (x + pm <= 0.0) ++degenerate;
  }
  if (degenerate > 1) throw std::logic_error("ktree: multiple degenerate labels");
}

std::string KTree::to_csv() const {
  std::ostringstream os;
  os << "# shape=" << shape.to_newick() << "\n";
  os << "label,mass\n";
  for (const auto& [label, x] : top_masses) os << label << "," << x << "\n";
  for (const auto& [e, beta] : edge_partitions) {
    os << "# edge {";
    bool first = true;
    for (int j = 1; j <= 64; ++j)
      if (e & label_bit(j)) {
        if (!first) os << " ";
        os << j;
        first = false;
      }
    os << "}\n" << beta.to_csv();
  }
  return os.str();
}

// ------------------------------------------------------------------- samplers

TreeShape sample_uniform_shape(int k, RngStream& rng) {
  if (k < 1) throw std::invalid_argument("sample_uniform_shape: k < 1");
  TreeShape t;
  t.labels = label_bit(1);
  for (int m = 2; m <= k; ++m) {
    // candidate edges: every internal edge plus every leaf edge (2m-3 total)
    std::vector<LabelSet> cand = t.edges;
    for (int j = 1; j < m; ++j) cand.push_back(label_bit(j));
    t = shape_insert(t, cand[rng.uniform_int(cand.size())], m);
  }
  return t;
}

// The normalized partition is independent of the subordinator's gamma mass,
// so rescaling to the target mass is exact in law; the jump floor, however,
// is applied before scaling, so it is re-adapted until the effective floor
// after scaling is within a factor 1.25 of the requested one.
IntervalPartition scaled_pdip(double mass, double block_floor, RngStream& rng) {
  if (mass <= 0.0) return IntervalPartition{};
  double floor_try = block_floor;
  for (int it = 0;; ++it) {
    PdipSample s = sample_pdip_subordinator(1.0, floor_try, rng);
    double c = mass / s.gamma_mass;
    double eff = c * floor_try;
    if ((eff <= 1.25 * block_floor && eff >= 0.4 * block_floor) || it >= 7)
      return scale(s.partition, c);
    floor_try = std::max(0.8 * block_floor / c, 0.05 * block_floor);
  }
}

KTree sample_brownian_ktree(int k, double total_mass, double block_floor,
                            RngStream& rng) {
  if (k < 2) throw std::invalid_argument("sample_brownian_ktree: k < 2");
  if (total_mass <= 0.0)
    throw std::invalid_argument("sample_brownian_ktree: mass <= 0");
  KTree out;
  out.shape = sample_uniform_shape(k, rng);
  std::vector<double> params(2 * k - 1, 0.5);
  std::vector<double> w = rng.dirichlet(params);
  for (int j = 1; j <= k; ++j) out.top_masses[j] = total_mass * w[j - 1];
  std::vector<LabelSet> df = out.shape.depth_first_edges();
  for (std::size_t i = 0; i < df.size(); ++i)
    out.edge_partitions[df[i]] =
        scaled_pdip(total_mass * w[k + i], block_floor, rng);
  return out;
}

// ------------------------------------------------------------------ operators

KTree project_drop(const KTree& tree, int j) {
  if (!(tree.shape.labels & label_bit(j))) return tree;
  if (tree.shape.leaf_count() < 2)
    throw std::invalid_argument("project_drop: cannot drop the last label");
  LabelSet leaf = label_bit(j);
  LabelSet p = tree.shape.parent(leaf);
  LabelSet sib = tree.shape.sibling(leaf);
  KTree out;
  out.shape.labels = tree.shape.labels & ~leaf;
  for (LabelSet e : tree.shape.edges)
    if (e != p) out.shape.edges.push_back(e & ~leaf);
  std::sort(out.shape.edges.begin(), out.shape.edges.end());
  for (const auto& [label, x] : tree.top_masses)
    if (label != j) out.top_masses[label] = x;
  for (const auto& [e, beta] : tree.edge_partitions)
    if (e != p) out.edge_partitions[e & ~leaf] = beta;
  double xj = tree.top_masses.at(j);
  const IntervalPartition& bp = tree.edge_partitions.at(p);
  if (popcount(sib) == 1) {
    // type-2 parent {a, j}: fold everything into label a's top mass
    int a = least_label(sib);
    out.top_masses[a] += xj + bp.total_mass();
  } else {
    // type-1 parent: sibling partition, then the dropped top as a block,
    // then the parent partition
    IntervalPartition mid;
    if (xj > 0.0) mid.blocks.push_back({xj, 0.0});
    out.edge_partitions[sib] =
        concatenate(concatenate(out.edge_partitions.at(sib), mid), bp);
  }
  return out;
}

KTree project_to(const KTree& tree, int k) {
  KTree out = tree;
  for (int j = 64; j > k; --j)
    if (out.shape.labels & label_bit(j)) {
      if (out.shape.leaf_count() == 1) break;
      out = project_drop(out, j);
    }
  return out;
}

namespace {

// split at block `index`: (left part, block mass, right part); diversity
// offsets follow the stored left diversities
void split_partition(const IntervalPartition& beta, std::size_t index,
                     IntervalPartition& left, double& block_mass,
                     IntervalPartition& right) {
  if (index >= beta.blocks.size())
    throw std::out_of_range("split_partition: bad block index");
  left = IntervalPartition{};
  right = IntervalPartition{};
  left.diversity_valid = right.diversity_valid = beta.diversity_valid;
  block_mass = beta.blocks[index].mass;
  for (std::size_t i = 0; i < index; ++i) left.blocks.push_back(beta.blocks[i]);
  left.total_diversity = beta.blocks[index].left_diversity;
  double shift = index + 1 < beta.blocks.size()
                     ? beta.blocks[index + 1].left_diversity
                     : beta.total_diversity;
  for (std::size_t i = index + 1; i < beta.blocks.size(); ++i)
    right.blocks.push_back(
        {beta.blocks[i].mass, beta.blocks[i].left_diversity - shift});
  right.total_diversity = beta.total_diversity - shift;
  right.mass_deficit = beta.mass_deficit;
}

}  // namespace

KTree insert_label(const KTree& tree, const BlockRef& block, int j, double y1,
                   double y2, const IntervalPartition& gamma) {
  if (tree.shape.labels & label_bit(j))
    throw std::invalid_argument("insert_label: duplicate label");
  KTree out;
  if (block.label != 0) {
    int i = block.label;
    double xi = tree.top_masses.at(i);
    out.shape = shape_insert(tree.shape, label_bit(i), j);
    for (const auto& [label, x] : tree.top_masses)
      out.top_masses[label] = label == i ? xi * y1 : x;
    out.top_masses[j] = xi * y2;
    for (const auto& [e, beta] : tree.edge_partitions) {
      LabelSet e2 = (label_bit(i) & e) == label_bit(i) ? e | label_bit(j) : e;
      out.edge_partitions[e2] = beta;
    }
    out.edge_partitions[label_bit(i) | label_bit(j)] =
        xi > 0.0 ? scale(gamma, xi) : IntervalPartition{};
  } else {
    LabelSet f = block.edge;
    IntervalPartition left, right;
    double bm = 0.0;
    split_partition(tree.edge_partitions.at(f), block.index, left, bm, right);
    out.shape = shape_insert(tree.shape, f, j);
    for (const auto& [label, x] : tree.top_masses) out.top_masses[label] = x;
    out.top_masses[j] = bm;
    for (const auto& [e, beta] : tree.edge_partitions) {
      if (e == f) continue;
      LabelSet e2 = (f & e) == f ? e | label_bit(j) : e;
      out.edge_partitions[e2] = beta;
    }
    out.edge_partitions[f] = left;
    out.edge_partitions[f | label_bit(j)] = right;
  }
  return out;
}

KTree resampling_kernel(const KTree& tree, int j, double block_floor,
                        RngStream& rng) {
  double total = tree.total_mass();
  if (total <= 0.0)
    throw std::invalid_argument("resampling_kernel: zero total mass");
  std::vector<std::pair<BlockRef, double>> bl = tree.blocks();
  double listed = 0.0;
  for (const auto& [r, m] : bl) listed += m;
  double u = rng.uniform() * total;
  if (u >= listed) u = rng.uniform() * listed;  // landed in deficit mass
  std::size_t pick = 0;
  for (double acc = 0.0; pick + 1 < bl.size(); ++pick) {
    acc += bl[pick].second;
    if (u < acc) break;
  }
  const BlockRef& r = bl[pick].first;
  if (r.label != 0) {
    std::vector<double> w = rng.dirichlet({0.5, 0.5, 0.5});
    IntervalPartition gamma = scaled_pdip(w[2], block_floor, rng);
    return insert_label(tree, r, j, w[0], w[1], gamma);
  }
  return insert_label(tree, r, j, 0.0, 0.0, IntervalPartition{});
}

SwapReduceResult swap_and_reduce(const KTree& tree) {
  int i = tree.degenerate_label();
  if (i == 0)
    throw std::invalid_argument("swap_and_reduce: no degenerate label");
  int j = swap_target(tree.shape, i);
  LabelSet p = tree.shape.parent(label_bit(i));
  SwapReduceResult res;
  res.caused_label = i;
  res.dropped_label = j;
  res.swapped = i != j;
  res.tree.shape = shape_swap_reduce(tree.shape, i);
  for (const auto& [label, x] : tree.top_masses) {
    if (label == j && j != i) continue;
    if (label == i)
      res.tree.top_masses[i] = i == j ? 0.0 : tree.top_masses.at(j);
    else
      res.tree.top_masses[label] = x;
  }
  if (i == j) res.tree.top_masses.erase(i);
  for (const auto& [e, beta] : tree.edge_partitions)
    if (e != p) res.tree.edge_partitions[swap_reduce_mask(e, i, j)] = beta;
  return res;
}

// ------------------------------------------------------------------ evolution

namespace {

struct CompoundPlan {
  LabelSet edge = 0;
  int type = 0;
  int label1 = 0;  // type-1: the top label; type-2: smaller pair label
  int label2 = 0;  // type-2: larger pair label
};

std::vector<CompoundPlan> compound_plans(const TreeShape& t) {
  std::vector<CompoundPlan> out;
  for (LabelSet e : t.depth_first_edges()) {
    CompoundPlan p;
    p.edge = e;
    p.type = t.edge_type(e);
    if (p.type == 2) {
      p.label1 = least_label(e);
      p.label2 = least_label(e & ~label_bit(p.label1));
    } else if (p.type == 1) {
      auto [c1, c2] = t.children(e);
      LabelSet leaf = popcount(c1) == 1 ? c1 : c2;
      p.label1 = least_label(leaf);
    }
    out.push_back(p);
  }
  return out;
}

EvolutionTrace run_compound(const CompoundPlan& plan, const KTree& tree,
                            const std::vector<double>& levels, double step,
                            const Truncation& trunc, RngStream& rng) {
  const IntervalPartition& beta = tree.edge_partitions.at(plan.edge);
  if (plan.type == 0) return run_type0(beta, levels, step, trunc, rng);
  if (plan.type == 1)
    return run_type1(tree.top_masses.at(plan.label1), beta, levels, step,
                     trunc, rng);
  Type2State s;
  s.m1 = tree.top_masses.at(plan.label1);
  s.m2 = tree.top_masses.at(plan.label2);
  s.beta = beta;
  return run_type2(s, levels, step, trunc, rng);
}

// compound state at trace index `si` written back into the tree
void apply_state(KTree& tree, const CompoundPlan& plan, const Type2State& s) {
  tree.edge_partitions[plan.edge] = s.beta;
  if (plan.type >= 1) tree.top_masses[plan.label1] = s.m1;
  if (plan.type == 2) tree.top_masses[plan.label2] = s.m2;
}

// exact state of a degenerating compound at its degeneration level
Type2State degenerate_state(const EvolutionTrace& trace, int type) {
  Type2State s;
  if (type == 2 && trace.surviving_label == 1) s.m1 = trace.surviving_mass;
  if (type == 2 && trace.surviving_label == 2) s.m2 = trace.surviving_mass;
  return s;
}

KTree zero_ktree() { return KTree{}; }

constexpr int kMaxEpochs = 20000;

}  // namespace

KTreeTrace run_ktree_evolution(const KTree& initial, EvolutionMode mode,
                               const std::vector<double>& levels, double step,
                               const Truncation& truncation, RngStream& rng) {
  KTreeTrace tr;
  tr.levels = levels;
  std::sort(tr.levels.begin(), tr.levels.end());
  if (tr.levels.empty())
    throw std::invalid_argument("run_ktree_evolution: no levels");
  tr.snapshots.resize(tr.levels.size());
  tr.extinction_level = std::numeric_limits<double>::infinity();

  KTree cur = initial;
  double base = 0.0;
  std::size_t li = 0;  // next level to fill
  // levels at base itself report the current state
  while (li < tr.levels.size() && tr.levels[li] <= base)
    tr.snapshots[li++] = cur;

  for (int epoch = 0; epoch < kMaxEpochs; ++epoch) {
    if (li >= tr.levels.size()) return tr;
    int k = cur.shape.leaf_count();
    // below the resolution of the truncated spindle measure the degeneration
    // cascade cannot be tracked; treat the tree as absorbed
    if (k == 0 || cur.total_mass() <= 10.0 * truncation.parameter) {
      tr.extinction_level = std::min(tr.extinction_level, base);
      while (li < tr.levels.size()) tr.snapshots[li++] = zero_ktree();
      return tr;
    }
    if (k == 1) {
      // single label: BESQ(-1) total mass to absorption
      int label = least_label(cur.shape.labels);
      double horizon = std::max(tr.levels.back() - base, 2.0 * step);
      BesqPath path =
          besq_simulate(-1.0, cur.top_masses.at(label), step, horizon, rng);
      for (; li < tr.levels.size(); ++li) {
        double h = tr.levels[li] - base;
        double v = path.lifetime <= h ? 0.0 : path.value_at(h);
        if (v <= 0.0) {
          tr.snapshots[li] = zero_ktree();
        } else {
          KTree one;
          one.shape.labels = label_bit(label);
          one.top_masses[label] = v;
          tr.snapshots[li] = one;
        }
      }
      if (path.lifetime < horizon) tr.extinction_level = base + path.lifetime;
      return tr;
    }

    std::vector<double> rel;
    for (std::size_t i = li; i < tr.levels.size(); ++i)
      rel.push_back(tr.levels[i] - base);
    double horizon = rel.back();

    std::vector<CompoundPlan> plans = compound_plans(cur.shape);
    std::vector<RngStream> saved;
    std::vector<EvolutionTrace> traces;
    for (const CompoundPlan& p : plans) {
      saved.push_back(rng);
      traces.push_back(run_compound(p, cur, rel, step, truncation, rng));
    }

    double d_rel = std::numeric_limits<double>::infinity();
    std::size_t d_idx = 0;
    for (std::size_t i = 0; i < traces.size(); ++i)
      if (plans[i].type != 0 && traces[i].degeneration_level < d_rel) {
        d_rel = traces[i].degeneration_level;
        d_idx = i;
      }

    if (d_rel > horizon) {
      // no degeneration in range: assemble snapshots and finish
      for (std::size_t r = 0; li < tr.levels.size(); ++li, ++r) {
        KTree snap = cur;
        for (std::size_t i = 0; i < plans.size(); ++i)
          apply_state(snap, plans[i], traces[i].states[r]);
        tr.snapshots[li] = snap;
      }
      return tr;
    }

    // snapshots strictly below the degeneration level
    std::size_t r = 0;
    for (; li < tr.levels.size() && tr.levels[li] - base < d_rel; ++li, ++r) {
      KTree snap = cur;
      for (std::size_t i = 0; i < plans.size(); ++i)
        apply_state(snap, plans[i], traces[i].states[r]);
      tr.snapshots[li] = snap;
    }

    // replay each compound with the degeneration level added to the grid to
    // read off the exact tree state at D-; the engines' paths are functions
    // of the RNG stream and the level maximum only, so the replay follows
    // the identical trajectory
    std::vector<double> rel2 = rel;
    rel2.insert(std::lower_bound(rel2.begin(), rel2.end(), d_rel), d_rel);
    std::size_t d_pos =
        std::lower_bound(rel2.begin(), rel2.end(), d_rel) - rel2.begin();
    KTree at_d = cur;
    for (std::size_t i = 0; i < plans.size(); ++i) {
      if (i == d_idx) {
        apply_state(at_d, plans[i], degenerate_state(traces[i], plans[i].type));
        continue;
      }
      EvolutionTrace t2 =
          run_compound(plans[i], cur, rel2, step, truncation, saved[i]);
      apply_state(at_d, plans[i], t2.states[d_pos]);
    }

    double d_abs = base + d_rel;
    if (mode == EvolutionMode::killed) {
      KTreeEvent ev;
      ev.kind = KTreeEvent::Kind::degeneration;
      ev.level = d_abs;
      ev.caused_label = at_d.degenerate_label();
      tr.events.push_back(ev);
      tr.extinction_level = d_abs;
      while (li < tr.levels.size()) tr.snapshots[li++] = zero_ktree();
      return tr;
    }

    SwapReduceResult red = swap_and_reduce(at_d);
    KTreeEvent ev;
    ev.kind = KTreeEvent::Kind::degeneration;
    ev.level = d_abs;
    ev.caused_label = red.caused_label;
    ev.dropped_label = red.dropped_label;
    tr.events.push_back(ev);
    cur = red.tree;
    if (mode == EvolutionMode::resampling) {
      if (cur.total_mass() <= 0.0) {
        tr.extinction_level = d_abs;
        while (li < tr.levels.size()) tr.snapshots[li++] = zero_ktree();
        return tr;
      }
      cur = resampling_kernel(cur, red.dropped_label, truncation.parameter,
                              rng);
      KTreeEvent rev;
      rev.kind = KTreeEvent::Kind::resample;
      rev.level = d_abs;
      rev.dropped_label = red.dropped_label;
      tr.events.push_back(rev);
    }
    base = d_abs;
    while (li < tr.levels.size() && tr.levels[li] <= base)
      tr.snapshots[li++] = cur;
  }
  throw std::runtime_error("run_ktree_evolution: epoch cap exceeded");
}

std::string KTreeTrace::event_csv() const {
  std::ostringstream os;
  os << "level,kind,caused_label,dropped_label\n";
  for (const KTreeEvent& e : events)
    os << e.level << ","
       << (e.kind == KTreeEvent::Kind::degeneration ? "degeneration"
                                                    : "resample")
       << "," << e.caused_label << "," << e.dropped_label << "\n";
  return os.str();
}

// ------------------------------------------------------------ depoissonization

namespace {

KTree normalize_ktree(const KTree& t, double mass) {
  KTree out = t;
  for (auto& [label, x] : out.top_masses) x /= mass;
  for (auto& [e, beta] : out.edge_partitions)
    if (beta.total_mass() > 0.0 || !beta.blocks.empty())
      beta = scale(beta, 1.0 / mass);
  return out;
}

}  // namespace

UnitMassTrace depoissonize(const KTreeTrace& trace,
                           const std::vector<double>& u_grid) {
  UnitMassTrace out;
  std::size_t n = trace.levels.size();
  std::vector<double> mass(n), u_of(n);
  std::size_t alive = 0;
  for (; alive < n; ++alive) {
    mass[alive] = trace.snapshots[alive].total_mass();
    if (mass[alive] <= 0.0) break;
  }
  if (alive == 0) return out;
  u_of[0] = trace.levels[0] / mass[0];
  for (std::size_t i = 1; i < alive; ++i)
    u_of[i] = u_of[i - 1] + (trace.levels[i] - trace.levels[i - 1]) * 0.5 *
                                (1.0 / mass[i - 1] + 1.0 / mass[i]);
  out.u_covered = u_of[alive - 1];
  for (double u : u_grid) {
    if (u > out.u_covered) continue;
    std::size_t hi =
        std::lower_bound(u_of.begin(), u_of.begin() + alive, u) - u_of.begin();
    std::size_t pick;
    if (hi == 0) {
      pick = 0;
    } else {
      // nearest grid level in u
      pick = (u - u_of[hi - 1] <= u_of[hi] - u) ? hi - 1 : hi;
    }
    out.times.push_back(u);
    out.states.push_back(normalize_ktree(trace.snapshots[pick], mass[pick]));
  }
  for (const KTreeEvent& e : trace.events) {
    if (e.level > trace.levels[alive - 1]) continue;
    std::size_t hi = std::lower_bound(trace.levels.begin(),
                                      trace.levels.begin() + alive, e.level) -
                     trace.levels.begin();
    KTreeEvent ue = e;
    if (hi == 0) {
      ue.level = u_of[0] * (trace.levels[0] > 0.0
                                ? e.level / trace.levels[0]
                                : 0.0);
    } else {
      double frac = (e.level - trace.levels[hi - 1]) /
                    (trace.levels[hi] - trace.levels[hi - 1]);
      ue.level = u_of[hi - 1] + frac * (u_of[hi] - u_of[hi - 1]);
    }
    out.events.push_back(ue);
  }
  return out;
}

MassPath wright_fisher_projection(const UnitMassTrace& trace) {
  MassPath out;
  if (trace.states.empty()) return out;
  const TreeShape shape = trace.states.front().shape;
  std::vector<LabelSet> df = shape.depth_first_edges();
  for (std::size_t i = 0; i < trace.states.size(); ++i) {
    const KTree& t = trace.states[i];
    if (!(t.shape == shape)) break;
    std::vector<double> coords;
    bool vanished = false;
    for (const auto& [label, x] : t.top_masses) {
      coords.push_back(x);
      if (x <= 0.0) vanished = true;
    }
    for (LabelSet e : df) {
      double m = t.edge_partitions.at(e).total_mass();
      coords.push_back(m);
      if (m <= 0.0) vanished = true;
    }
    if (vanished) break;
    out.times.push_back(4.0 * trace.times[i]);
    out.values.push_back(std::move(coords));
  }
  return out;
}

// ----------------------------------------------------------------- consistency

bool ConsistencyReport::all_pass() const {
  return top_mass.pass && partition_mass.pass && diversity.pass &&
         total_mass.pass;
}

ConsistencyReport consistency_check(int k_upper, int k_lower, double y,
                                    int n_replicates, double step,
                                    const Truncation& truncation,
                                    RngStream& rng) {
  if (k_upper <= k_lower || k_lower < 2)
    throw std::invalid_argument("consistency_check: need k_upper > k_lower >= 2");
  KTree lower0 =
      sample_brownian_ktree(k_lower, 1.0, truncation.parameter, rng);
  auto stats_of = [](const KTree& t) {
    double top = 0.0, pm = 0.0, div = 0.0;
    if (t.top_masses.count(1)) top = t.top_masses.at(1);
    for (const auto& [e, beta] : t.edge_partitions) {
      pm += beta.total_mass();
      div += beta.total_diversity;
    }
    return std::array<double, 4>{top, pm, div, t.total_mass()};
  };
  std::vector<double> a[4], b[4];
  std::vector<double> lv = {y};
  for (int i = 0; i < n_replicates; ++i) {
    KTree upper0 = lower0;
    for (int j = k_lower + 1; j <= k_upper; ++j)
      upper0 = resampling_kernel(upper0, j, truncation.parameter, rng);
    KTreeTrace ut = run_ktree_evolution(upper0, EvolutionMode::resampling, lv,
                                        step, truncation, rng);
    KTree up = ut.snapshots[0];
    if (up.shape.leaf_count() > 0) up = project_to(up, k_lower);
    auto sa = stats_of(up);
    KTreeTrace lt = run_ktree_evolution(lower0, EvolutionMode::resampling, lv,
                                        step, truncation, rng);
    auto sb = stats_of(lt.snapshots[0]);
    for (int c = 0; c < 4; ++c) {
      a[c].push_back(sa[c]);
      b[c].push_back(sb[c]);
    }
  }
  ConsistencyReport rep;
  rep.top_mass = ks_two_sample(a[0], b[0]);
  rep.partition_mass = ks_two_sample(a[1], b[1]);
  rep.diversity = ks_two_sample(a[2], b[2]);
  rep.total_mass = ks_two_sample(a[3], b[3]);
  return rep;
}

}  // namespace aldous
