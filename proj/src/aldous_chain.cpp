#include "aldous/aldous_chain.hpp"

#include <algorithm>
#include <bit>
#include <sstream>
#include <stdexcept>

namespace aldous {

// ------------------------------------------------------------- LabeledTree

int LabeledTree::sibling(int v) const {
  int p = parent[v];
  if (p < 0) return -1;
  if (child[p][0] == v) return child[p][1];
  return child[p][0];
}

int LabeledTree::least_label_in_subtree(int v) const {
  if (is_leaf(v)) return label[v];
  int a = least_label_in_subtree(child[v][0]);
  if (child[v][1] >= 0) a = std::min(a, least_label_in_subtree(child[v][1]));
  return a;
}

int LabeledTree::subtree_leaf_count(int v) const {
  if (is_leaf(v)) return 1;
  int c = subtree_leaf_count(child[v][0]);
  if (child[v][1] >= 0) c += subtree_leaf_count(child[v][1]);
  return c;
}

void LabeledTree::validate() const {
  int m = (int)parent.size();
  if ((int)child.size() != m || (int)label.size() != m)
    throw std::logic_error("LabeledTree: array size mismatch");
  int n = leaf_count();
  if (m != 2 * n) throw std::logic_error("LabeledTree: vertex count != 2n");
  if (parent[0] != -1 || child[0][0] < 0 || child[0][1] != -1)
    throw std::logic_error("LabeledTree: root must have exactly one child");
  std::vector<int> seen(n + 1, 0);
  for (int v = 0; v < m; ++v) {
    if (v > 0) {
      int p = parent[v];
      if (p < 0 || p >= m || (child[p][0] != v && child[p][1] != v))
        throw std::logic_error("LabeledTree: broken parent link");
    }
    if (is_leaf(v)) {
      if (child[v][1] >= 0)
        throw std::logic_error("LabeledTree: leaf with a second child");
      if (label[v] < 1 || label[v] > n || seen[label[v]]++)
        throw std::logic_error("LabeledTree: labels not a bijection");
      if (leaf_vertex[label[v]] != v)
        throw std::logic_error("LabeledTree: stale leaf index");
    } else if (v > 0 && (child[v][0] < 0 || child[v][1] < 0)) {
      throw std::logic_error("LabeledTree: internal vertex without two children");
    }
  }
}

namespace {

std::string shape_key_rec(const LabeledTree& t, int v) {
  if (t.is_leaf(v)) return std::to_string(t.label[v]);
  std::string a = shape_key_rec(t, t.child[v][0]);
  std::string b = shape_key_rec(t, t.child[v][1]);
  if (b < a) std::swap(a, b);
  return "(" + a + "," + b + ")";
}

std::string newick_rec(const LabeledTree& t, int v) {
  if (t.is_leaf(v)) return std::to_string(t.label[v]);
  return "(" + newick_rec(t, t.child[v][0]) + "," +
         newick_rec(t, t.child[v][1]) + ")";
}

}  // namespace

std::string LabeledTree::shape_key() const { return shape_key_rec(*this, child[0][0]); }

std::string LabeledTree::to_newick() const {
  return newick_rec(*this, child[0][0]) + ";";
}

LabeledTree singleton_tree() {
  LabeledTree t;
  t.parent = {-1, 0};
  t.child = {{1, -1}, {-1, -1}};
  t.label = {0, 1};
  t.leaf_vertex = {-1, 1};
  return t;
}

namespace {

// graft a new leaf with the given label onto the edge above `v`, reusing the
// supplied vertex slots when nonnegative (else appending)
void graft_leaf(LabeledTree& t, int v, int lab, int slot_mid = -1,
                int slot_leaf = -1) {
  int w = slot_mid, u = slot_leaf;
  if (w < 0) {
    w = (int)t.parent.size();
    t.parent.push_back(0);
    t.child.push_back({-1, -1});
    t.label.push_back(0);
  }
  if (u < 0) {
    u = (int)t.parent.size();
    t.parent.push_back(0);
    t.child.push_back({-1, -1});
    t.label.push_back(0);
  }
  int p = t.parent[v];
  t.parent[w] = p;
  (t.child[p][0] == v ? t.child[p][0] : t.child[p][1]) = w;
  t.child[w] = {v, u};
  t.label[w] = 0;
  t.parent[v] = w;
  t.parent[u] = w;
  t.child[u] = {-1, -1};
  t.label[u] = lab;
  if ((int)t.leaf_vertex.size() <= lab) t.leaf_vertex.resize(lab + 1, -1);
  t.leaf_vertex[lab] = u;
}

}  // namespace

LabeledTree sample_uniform_tree(int n, RngStream& rng) {
  if (n < 1) throw std::invalid_argument("sample_uniform_tree: n < 1");
  LabeledTree t = singleton_tree();
  for (int j = 2; j <= n; ++j) {
    // uniform over the 2j-3 edges of the current tree = non-root vertices
    int v = 1 + (int)rng.uniform_int(2L * j - 3);
    graft_leaf(t, v, j);
  }
  return t;
}

ChainEvent modified_chain_step(LabeledTree& tree, RngStream& rng) {
  int n = tree.leaf_count();
  if (n < 3) throw std::domain_error("modified_chain_step: n < 3");
  ChainEvent ev;
  ev.i = 1 + (int)rng.uniform_int(n);
  int v = tree.leaf_vertex[ev.i];
  int p = tree.parent[v];
  int a = tree.least_label_in_subtree(tree.sibling(v));
  int b = 0;
  if (tree.parent[p] != 0) b = tree.least_label_in_subtree(tree.sibling(p));
  ev.i_tilde = std::max({ev.i, a, b});
  if (ev.i_tilde != ev.i) {
    int w = tree.leaf_vertex[ev.i_tilde];
    std::swap(tree.label[v], tree.label[w]);
    std::swap(tree.leaf_vertex[ev.i], tree.leaf_vertex[ev.i_tilde]);
  }
  // delete leaf i_tilde and contract its parent; the two vertex slots are
  // reused by the reinsertion so the numbering stays compact
  int u = tree.leaf_vertex[ev.i_tilde];
  int q = tree.parent[u];
  int s = tree.sibling(u);
  int g = tree.parent[q];
  tree.parent[s] = g;
  (tree.child[g][0] == q ? tree.child[g][0] : tree.child[g][1]) = s;
  // uniform edge of the reduced tree: non-root vertices other than u, q
  int pick = (int)rng.uniform_int(2L * n - 3);
  int w = -1;
  for (int x = 1; x < (int)tree.parent.size(); ++x) {
    if (x == u || x == q) continue;
    if (pick-- == 0) {
      w = x;
      break;
    }
  }
  ev.insertion_edge = w;
  graft_leaf(tree, w, ev.i_tilde, q, u);
  return ev;
}

// ------------------------------------------------------- decorated k-trees

int DecoratedKTree::total_weight() const {
  int s = 0;
  for (auto& [j, wgt] : external) s += wgt;
  for (auto& [e, seq] : internal_seq)
    for (int wgt : seq) s += wgt;
  return s;
}

DecoratedKTree decorated_projection(const LabeledTree& tree, int k) {
  int n = tree.leaf_count();
  if (k < 1 || k > n)
    throw std::invalid_argument("decorated_projection: k out of range");
  int m = (int)tree.parent.size();
  // spanned labels below each vertex, restricted to 1..k
  std::vector<LabelSet> below(m, 0);
  for (int j = 1; j <= k; ++j) {
    for (int v = tree.leaf_vertex[j]; v != -1; v = tree.parent[v])
      below[v] |= label_bit(j);
  }
  DecoratedKTree out;
  out.shape.labels = below[0];
  for (int v = 1; v < m; ++v) {
    if (below[v] == 0 || tree.is_leaf(v)) continue;
    LabelSet l = below[tree.child[v][0]];
    LabelSet r = below[tree.child[v][1]];
    if (l != 0 && r != 0) out.shape.edges.push_back(below[v]);
  }
  out.shape.edges.push_back(out.shape.labels);
  std::sort(out.shape.edges.begin(), out.shape.edges.end());
  out.shape.edges.erase(
      std::unique(out.shape.edges.begin(), out.shape.edges.end()),
      out.shape.edges.end());
  if (k == 1) {
    out.external[1] = n;
    return out;
  }
  // walk up from each spanned node (leaf or branch point) to the next one,
  // collecting grafted-subtree leaf counts farthest-from-root first
  auto is_branch = [&](int v) {
    if (v == 0 || tree.is_leaf(v)) return false;
    return below[tree.child[v][0]] != 0 && below[tree.child[v][1]] != 0;
  };
  auto walk_up = [&](int start, std::vector<int>& seq) {
    int v = start;
    while (true) {
      int p = tree.parent[v];
      if (p == 0 || is_branch(p)) return p;
      seq.push_back(tree.subtree_leaf_count(tree.sibling(v)));
      v = p;
    }
  };
  for (int j = 1; j <= k; ++j) {
    std::vector<int> grafts;
    walk_up(tree.leaf_vertex[j], grafts);
    int w = 1;
    for (int g : grafts) w += g;
    out.external[j] = w;
  }
  for (int v = 1; v < m; ++v) {
    if (!is_branch(v)) continue;
    std::vector<int> seq;
    walk_up(v, seq);
    out.internal_seq[below[v]] = std::move(seq);
  }
  return out;
}

namespace {

// drop the largest label from a decorated k-tree
DecoratedKTree decorated_drop_max(const DecoratedKTree& t) {
  int k = t.shape.leaf_count();
  if (k < 2) throw std::invalid_argument("decorated_reduce: cannot drop below 1");
  int mlab = 0;
  for (int j = 1; j <= 64; ++j)
    if (t.shape.labels & label_bit(j)) mlab = j;
  LabelSet mbit = label_bit(mlab);
  DecoratedKTree out;
  out.shape.labels = t.shape.labels ^ mbit;
  if (k == 2) {
    // single branch point at the top: everything merges into leaf 1's edge
    int other = 0;
    for (auto& [j, wgt] : t.external)
      if (j != mlab) other = j;
    int w = t.external.at(other) + t.external.at(mlab);
    auto it = t.internal_seq.find(t.shape.labels);
    if (it != t.internal_seq.end())
      for (int g : it->second) w += g;
    out.shape.edges = {out.shape.labels};
    out.external[other] = w;
    return out;
  }
  LabelSet parent_of_leaf = t.shape.parent(mbit);  // the vanishing branch point
  LabelSet sib = t.shape.sibling(mbit);
  LabelSet parent_edge =
      parent_of_leaf == t.shape.labels ? 0 : t.shape.parent(parent_of_leaf);
  for (LabelSet e : t.shape.edges) {
    if (e == parent_of_leaf) continue;
    out.shape.edges.push_back(e & ~mbit);
  }
  if (parent_of_leaf == t.shape.labels) out.shape.edges.push_back(out.shape.labels);
  std::sort(out.shape.edges.begin(), out.shape.edges.end());
  out.shape.edges.erase(
      std::unique(out.shape.edges.begin(), out.shape.edges.end()),
      out.shape.edges.end());
  // merged graft sequence: sibling-side grafts sit farther from the root
  std::vector<int> merged;
  bool sib_is_leaf = (std::popcount(sib) == 1);
  if (!sib_is_leaf) {
    auto it = t.internal_seq.find(sib);
    if (it != t.internal_seq.end()) merged = it->second;
  }
  merged.push_back(t.external.at(mlab));
  {
    LabelSet up = parent_edge == 0 ? t.shape.labels : parent_of_leaf;
    // the grafts of the edge above the vanishing branch point
    auto it = t.internal_seq.find(parent_of_leaf);
    if (parent_of_leaf == t.shape.labels) it = t.internal_seq.find(t.shape.labels);
    (void)up;
    if (it != t.internal_seq.end())
      merged.insert(merged.end(), it->second.begin(), it->second.end());
  }
  for (auto& [j, wgt] : t.external)
    if (j != mlab) out.external[j] = wgt;
  for (auto& [e, seq] : t.internal_seq) {
    if (e == parent_of_leaf || e == sib) continue;
    out.internal_seq[e & ~mbit] = seq;
  }
  if (sib_is_leaf) {
    int j = std::countr_zero(sib) + 1;
    int w = out.external.at(j);
    for (int g : merged) w += g;
    out.external[j] = w;
  } else {
    out.internal_seq[sib] = std::move(merged);
  }
  return out;
}

}  // namespace

DecoratedKTree decorated_reduce(const DecoratedKTree& t, int j) {
  int k = t.shape.leaf_count();
  if (j < 1 || j > k)
    throw std::invalid_argument("decorated_reduce: j out of range");
  DecoratedKTree out = t;
  for (int m = k; m > j; --m) out = decorated_drop_max(out);
  return out;
}

// ----------------------------------------------------------------- oCRP

long OcrpState::total() const {
  long s = 0;
  for (long m : tables) s += m;
  return s;
}

void OcrpState::validate() const {
  if (alpha != 0.5) throw std::logic_error("OcrpState: alpha must be 1/2");
  if (theta != 0.5 && theta != 0.0 && theta != -0.5)
    throw std::logic_error("OcrpState: theta not in {1/2, 0, -1/2}");
  for (long m : tables)
    if (m <= 0) throw std::logic_error("OcrpState: nonpositive table");
}

OcrpStep ocrp_poissonized_step(OcrpState& state, RngStream& rng) {
  if (state.tables.empty())
    throw std::logic_error("ocrp_poissonized_step: empty restaurant");
  int kk = (int)state.tables.size();
  long n = state.total();
  // per-table deaths (m) and births (m - alpha); new tables to the right of
  // each open slot at rate alpha, at the far left at rate theta when positive
  int open_slots = kk;
  if (state.theta < 0.0) open_slots = kk - 1;  // slot right of table 0 closed
  double left_rate = state.theta > 0.0 ? state.theta : 0.0;
  double total_rate = (double)n + ((double)n - kk * state.alpha) +
                      open_slots * state.alpha + left_rate;
  OcrpStep step;
  step.dt = rng.exponential(total_rate);
  double u = rng.uniform() * total_rate;
  for (int t = 0; t < kk; ++t) {
    double m = (double)state.tables[t];
    if (u < m) {
      step.kind = OcrpStep::Kind::death;
      step.table = t;
      if (--state.tables[t] == 0) state.tables.erase(state.tables.begin() + t);
      return step;
    }
    u -= m;
    if (u < m - state.alpha) {
      step.kind = OcrpStep::Kind::birth;
      step.table = t;
      ++state.tables[t];
      return step;
    }
    u -= m - state.alpha;
  }
  step.kind = OcrpStep::Kind::new_table;
  if (u < left_rate) {
    step.table = 0;
    state.tables.insert(state.tables.begin(), 1);
    return step;
  }
  u -= left_rate;
  int slot = std::min((int)(u / state.alpha), open_slots - 1);
  int at = state.theta < 0.0 ? slot + 2 : slot + 1;  // insert right of table
  step.table = at;
  state.tables.insert(state.tables.begin() + at, 1);
  return step;
}

// ---------------------------------------------------- continuous embedding

std::string ChainPath::event_csv() const {
  std::ostringstream os;
  os << "event_index,time,i,i_tilde,insertion_edge\n";
  for (std::size_t e = 0; e < events.size(); ++e)
    os << e << "," << times[e] << "," << events[e].i << ","
       << events[e].i_tilde << "," << events[e].insertion_edge << "\n";
  return os.str();
}

ChainPath continuous_chain(const LabeledTree& initial, double rate,
                           double horizon, RngStream& rng) {
  if (rate <= 0.0) throw std::invalid_argument("continuous_chain: rate <= 0");
  ChainPath path;
  path.final_tree = initial;
  double t = 0.0;
  while (true) {
    t += rng.exponential(rate);
    if (t > horizon) break;
    ChainEvent ev = modified_chain_step(path.final_tree, rng);
    path.times.push_back(t);
    path.events.push_back(ev);
  }
  return path;
}

}  // namespace aldous
