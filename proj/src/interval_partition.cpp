#include "aldous/interval_partition.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace aldous {

// ---------------------------------------------------------------- basics

double diversity_estimate(const IntervalPartition& p, double position,
                          double h) {
  if (h <= 0.0) throw std::invalid_argument("diversity_estimate: h <= 0");
  double right_end = 0.0;
  long count = 0;
  for (const Block& b : p.blocks) {
    right_end += b.mass;
    if (right_end > position + 1e-12) break;
    if (b.mass > h) ++count;
  }
  return std::sqrt(M_PI) * std::sqrt(h) * static_cast<double>(count);
}

IntervalPartition concatenate(const IntervalPartition& left,
                              const IntervalPartition& right) {
  IntervalPartition out = left;
  out.blocks.reserve(left.blocks.size() + right.blocks.size());
  for (const Block& b : right.blocks)
    out.blocks.push_back({b.mass, b.left_diversity + left.total_diversity});
  out.total_diversity = left.total_diversity + right.total_diversity;
  out.mass_deficit = left.mass_deficit + right.mass_deficit;
  out.diversity_valid = left.diversity_valid && right.diversity_valid;
  return out;
}

IntervalPartition scale(const IntervalPartition& p, double c) {
  if (c <= 0.0) throw std::invalid_argument("scale: c <= 0");
  IntervalPartition out = p;
  const double sc = std::sqrt(c);
  for (Block& b : out.blocks) {
    b.mass *= c;
    b.left_diversity *= sc;
  }
  out.total_diversity *= sc;
  out.mass_deficit *= c;
  return out;
}

// ---------------------------------------------------------------- metric
//
// The distortion of a monotone matching M between blocks of beta and gamma is
//   max( max_{(i,j) in M} |D_i - D_j|,
//        |D(beta)_inf - D(gamma)_inf|,
//        ||beta|| + sum_M (|a-b| - a),
//        ||gamma|| + sum_M (|a-b| - b) ).
// The last two wrap both the pairwise mass mismatch and the unmatched mass.
// We scan thresholds T on the diversity discrepancy: among matchings whose
// pairs all satisfy |D_i - D_j| <= T, the best achievable mass term
//   f(T) = min_M max(||beta|| + P(M), ||gamma|| + Q(M))
// is found by a grid DP whose states keep the Pareto front of (P, Q) —
// neither sum dominates the other because a matched pair can lower either.
// f is nonincreasing in T and the candidate value max(T, C, f(T)) is an
// upper bound that is tight when T is the discrepancy actually attained, so
// the minimum over the crossing point of T and max(C, f(T)) is exact.

namespace {

struct ParetoFront {
  // points sorted by P ascending, Q strictly descending
  std::vector<std::pair<double, double>> pts;

  void merge_in(std::vector<std::pair<double, double>>& scratch,
                const ParetoFront& other, double dp, double dq) {
    scratch.clear();
    scratch.reserve(pts.size() + other.pts.size());
    std::size_t i = 0, j = 0;
    auto shifted = [&](std::size_t k) {
      return std::make_pair(other.pts[k].first + dp, other.pts[k].second + dq);
    };
    while (i < pts.size() || j < other.pts.size()) {
      std::pair<double, double> cand;
      if (j >= other.pts.size() ||
          (i < pts.size() && pts[i].first <= shifted(j).first))
        cand = pts[i++];
      else
        cand = shifted(j++);
      while (!scratch.empty() && scratch.back().first >= cand.first - 1e-15 &&
             scratch.back().second >= cand.second - 1e-15)
        scratch.pop_back();
      if (scratch.empty() || cand.second < scratch.back().second - 1e-15)
        scratch.push_back(cand);
    }
    pts.swap(scratch);
  }
};

struct MetricInput {
  std::vector<double> a, da;  // masses, left diversities of beta
  std::vector<double> b, db;
  double ka = 0.0, kb = 0.0;  // total masses including deficits
  double c = 0.0;             // |total diversity difference|
};

MetricInput make_input(const IntervalPartition& x, const IntervalPartition& y) {
  MetricInput in;
  for (const Block& blk : x.blocks) {
    if (blk.mass <= 0.0) continue;
    in.a.push_back(blk.mass);
    in.da.push_back(blk.left_diversity);
  }
  for (const Block& blk : y.blocks) {
    if (blk.mass <= 0.0) continue;
    in.b.push_back(blk.mass);
    in.db.push_back(blk.left_diversity);
  }
  in.ka = x.total_mass();
  in.kb = y.total_mass();
  in.c = std::fabs(x.total_diversity - y.total_diversity);
  return in;
}

// min over matchings restricted to pairs with |da-db| <= threshold of
// max(ka + P, kb + Q); threshold < 0 forces the empty matching
double best_mass_term(const MetricInput& in, double threshold) {
  const std::size_t n = in.a.size(), m = in.b.size();
  // dp[j] holds the front for the (current i, j) prefix pair
  std::vector<ParetoFront> dp(m + 1), prev(m + 1);
  std::vector<std::pair<double, double>> scratch;
  for (std::size_t j = 0; j <= m; ++j) dp[j].pts = {{0.0, 0.0}};
  for (std::size_t i = 1; i <= n; ++i) {
    prev.swap(dp);
    dp[0] = prev[0];
    for (std::size_t j = 1; j <= m; ++j) {
      dp[j] = dp[j - 1];
      dp[j].merge_in(scratch, prev[j], 0.0, 0.0);
      if (std::fabs(in.da[i - 1] - in.db[j - 1]) <= threshold) {
        double s = std::fabs(in.a[i - 1] - in.b[j - 1]);
        dp[j].merge_in(scratch, prev[j - 1], s - in.a[i - 1],
                       s - in.b[j - 1]);
      }
    }
  }
  double best = std::numeric_limits<double>::infinity();
  for (const auto& [p, q] : dp[m].pts)
    best = std::min(best, std::max(in.ka + p, in.kb + q));
  return best;
}

}  // namespace

double dI_distance(const IntervalPartition& a, const IntervalPartition& b) {
  MetricInput in = make_input(a, b);
  const double empty_val = std::max({in.c, in.ka, in.kb});
  if (in.a.empty() || in.b.empty()) return empty_val;

  std::vector<double> cands;
  cands.reserve(in.a.size() * in.b.size());
  for (double x : in.da)
    for (double y : in.db) cands.push_back(std::fabs(x - y));
  std::sort(cands.begin(), cands.end());
  cands.erase(std::unique(cands.begin(), cands.end()), cands.end());

  auto g = [&](double t) { return std::max(in.c, best_mass_term(in, t)); };
  // smallest candidate with T >= g(T); g is nonincreasing, so bisect
  std::size_t lo = 0, hi = cands.size();
  while (lo < hi) {
    std::size_t mid = (lo + hi) / 2;
    if (cands[mid] >= g(cands[mid]))
      hi = mid;
    else
      lo = mid + 1;
  }
  double best = empty_val;
  if (lo < cands.size())
    best = std::min(best, std::max(cands[lo], g(cands[lo])));
  if (lo > 0) best = std::min(best, std::max(cands[lo - 1], g(cands[lo - 1])));
  return best;
}

namespace {

void brute_rec(const MetricInput& in, std::size_t i, std::size_t j,
               double max_disc, double p, double q, double& best) {
  if (i == in.a.size() || j == in.b.size()) {
    best = std::min(
        best, std::max({max_disc, in.c, in.ka + p, in.kb + q}));
    return;
  }
  brute_rec(in, i + 1, j, max_disc, p, q, best);
  brute_rec(in, i, j + 1, max_disc, p, q, best);
  double s = std::fabs(in.a[i] - in.b[j]);
  brute_rec(in, i + 1, j + 1,
            std::max(max_disc, std::fabs(in.da[i] - in.db[j])),
            p + s - in.a[i], q + s - in.b[j], best);
}

}  // namespace

double dI_distance_bruteforce(const IntervalPartition& a,
                              const IntervalPartition& b) {
  MetricInput in = make_input(a, b);
  if (in.a.size() > 8 || in.b.size() > 8)
    throw std::invalid_argument("dI_distance_bruteforce: too many blocks");
  double best = std::max({in.c, in.ka, in.kb});
  brute_rec(in, 0, 0, 0.0, 0.0, 0.0, best);
  return best;
}

// ---------------------------------------------------------------- csv

std::string IntervalPartition::to_csv() const {
  std::ostringstream os;
  os.precision(12);
  os << "# total_diversity=" << total_diversity
     << ", mass_deficit=" << mass_deficit << "\n";
  os << "index,mass,left_diversity\n";
  for (std::size_t i = 0; i < blocks.size(); ++i)
    os << i << ',' << blocks[i].mass << ',' << blocks[i].left_diversity
       << "\n";
  return os.str();
}

IntervalPartition IntervalPartition::from_csv(const std::string& text) {
  IntervalPartition p;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      auto grab = [&](const std::string& key) {
        auto pos = line.find(key);
        if (pos == std::string::npos) return 0.0;
        return std::stod(line.substr(pos + key.size()));
      };
      p.total_diversity = grab("total_diversity=");
      p.mass_deficit = grab("mass_deficit=");
      continue;
    }
    if (line.rfind("index", 0) == 0) continue;
    std::istringstream row(line);
    std::string tok;
    std::getline(row, tok, ',');  // index, unused
    Block b;
    std::getline(row, tok, ',');
    b.mass = std::stod(tok);
    std::getline(row, tok, ',');
    b.left_diversity = std::stod(tok);
    p.blocks.push_back(b);
  }
  return p;
}

}  // namespace aldous
