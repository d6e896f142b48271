#include "aldous/type_evolutions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "aldous/besq.hpp"
#include "aldous/pdip.hpp"

namespace aldous {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<double> sorted_levels(const std::vector<double>& levels) {
  if (levels.empty())
    throw std::invalid_argument("evolution trace: no query levels");
  std::vector<double> out = levels;
  std::sort(out.begin(), out.end());
  if (out.front() < 0.0)
    throw std::invalid_argument("evolution trace: negative level");
  return out;
}

// cap just above the highest query level; everything the trace reports lives
// strictly below it, so excursion elision above the cap is exact
double level_cap_for(const std::vector<double>& levels) {
  return 1.05 * levels.back() + 1e-6;
}

// Detach the leftmost block; remaining left diversities drop by the removed
// block's contribution to the prefix counts.
std::pair<double, IntervalPartition> split_leftmost(IntervalPartition p) {
  if (p.blocks.empty()) return {0.0, std::move(p)};
  double mass = p.blocks.front().mass;
  double shift =
      p.blocks.size() > 1 ? p.blocks[1].left_diversity : p.total_diversity;
  p.blocks.erase(p.blocks.begin());
  for (Block& b : p.blocks) b.left_diversity -= shift;
  p.total_diversity -= shift;
  return {mass, std::move(p)};
}

SpindleField type1_field(double top, const IntervalPartition& partition,
                         double step, const Truncation& truncation,
                         RngStream& rng, double cap) {
  SpindleField pm = type1_point_measure(partition, step, truncation, rng, cap);
  if (top <= 0.0) return pm;
  SpindleField f = clade(top, step, truncation, rng, cap);
  if (pm.points.empty()) return f;
  return concatenate_fields(f, pm);
}

Type2State zero_state(int parity, long regimes) {
  Type2State st;
  st.regime_parity = parity;
  st.regime_count = regimes;
  return st;
}

}  // namespace

// ------------------------------------------------------------ type 0 and 1

EvolutionTrace run_type0(const IntervalPartition& initial,
                         const std::vector<double>& levels, double step,
                         const Truncation& truncation, RngStream& rng) {
  EvolutionTrace tr;
  tr.levels = sorted_levels(levels);
  double cap = level_cap_for(tr.levels);
  SpindleField field = concatenate_fields(
      descent_field(cap, step, truncation, rng, cap),
      type1_point_measure(initial, step, truncation, rng, cap));
  for (double y : tr.levels) {
    Type2State st;
    st.beta = y <= 0.0 ? initial : skewer(field, y, field.length);
    tr.states.push_back(std::move(st));
  }
  return tr;
}

EvolutionTrace run_type1(double initial_top,
                         const IntervalPartition& initial_partition,
                         const std::vector<double>& levels, double step,
                         const Truncation& truncation, RngStream& rng) {
  EvolutionTrace tr;
  tr.levels = sorted_levels(levels);
  double cap = level_cap_for(tr.levels);
  SpindleField field =
      type1_field(initial_top, initial_partition, step, truncation, rng, cap);
  double death = field.max_level();
  if (death < cap) {
    tr.degeneration_level = death;
    tr.lifetime = death;
    tr.surviving_label = 0;
  }
  for (double y : tr.levels) {
    Type2State st;
    if (y <= 0.0) {
      st.m1 = initial_top;
      st.beta = initial_partition;
    } else {
      auto [top, rest] = split_leftmost(skewer(field, y, field.length));
      st.m1 = top;
      st.beta = std::move(rest);
    }
    tr.states.push_back(std::move(st));
  }
  return tr;
}

// ----------------------------------------------------------------- type 2

EvolutionTrace run_type2(const Type2State& initial,
                         const std::vector<double>& levels, double step,
                         const Truncation& truncation, RngStream& rng) {
  EvolutionTrace tr;
  tr.levels = sorted_levels(levels);
  double cap =
      std::max(level_cap_for(tr.levels), tr.levels.back() + 4.0 * step);
  const std::size_t n = tr.levels.size();
  std::size_t li = 0;
  while (li < n && tr.levels[li] <= 0.0) {
    tr.states.push_back(initial);
    ++li;
  }

  double base = 0.0;  // level where the current regime started
  int parity = initial.regime_parity == 2 ? 2 : 1;
  long regimes = initial.regime_count;
  double clock_mass = parity == 1 ? initial.m1 : initial.m2;
  double other_top = parity == 1 ? initial.m2 : initial.m1;
  IntervalPartition beta = initial.beta;
  constexpr long kMaxRegimes = 100000;

  for (;;) {
    if (clock_mass <= 0.0) {
      // clockless regime: already a degenerate state riding the type-1 side
      // alone; report degeneration where we stand
      tr.degeneration_level = base;
      tr.lifetime = base;
      tr.surviving_label = parity == 1 ? 2 : 1;
      tr.surviving_mass = other_top;
      break;
    }
    double horizon = cap - base;
    if (horizon <= 2.0 * step) break;  // nothing left below the cap
    // finer step for small clocks: the Euler lifetime bias scales with the
    // step relative to the starting mass
    double cstep = std::min(step, std::max(clock_mass / 100.0, step / 64.0));
    BesqPath clock = besq_simulate(-1.0, clock_mass, cstep, horizon, rng);
    double zeta = clock.lifetime;  // +inf while alive at the horizon
    double field_cap = std::min(zeta, horizon);
    SpindleField field =
        type1_field(other_top, beta, step, truncation, rng, field_cap);
    double field_death = field.points.empty() ? 0.0 : field.max_level();
    double regime_end = base + std::min(zeta, horizon);

    if (field_death < zeta) {
      // the type-1 component dies first: degeneration, then the clock runs on
      double degen = base + field_death;
      while (li < n && tr.levels[li] <= degen) {
        double h = tr.levels[li] - base;
        auto [top, rest] = split_leftmost(skewer(field, h, field.length));
        Type2State st = zero_state(parity, regimes);
        (parity == 1 ? st.m1 : st.m2) = clock.value_at(h);
        (parity == 1 ? st.m2 : st.m1) = top;
        st.beta = std::move(rest);
        tr.states.push_back(std::move(st));
        ++li;
      }
      if (degen < cap) {
        tr.degeneration_level = degen;
        tr.surviving_label = parity;
        tr.surviving_mass = clock.value_at(field_death);
        if (std::isfinite(zeta)) tr.lifetime = base + zeta;
      }
      while (li < n && tr.levels[li] <= regime_end) {
        Type2State st = zero_state(parity, regimes);
        (parity == 1 ? st.m1 : st.m2) = clock.value_at(tr.levels[li] - base);
        tr.states.push_back(std::move(st));
        ++li;
      }
      break;
    }

    // regime runs its course (or past the cap)
    while (li < n && tr.levels[li] <= regime_end) {
      double h = tr.levels[li] - base;
      auto [top, rest] = split_leftmost(skewer(field, h, field.length));
      Type2State st = zero_state(parity, regimes);
      (parity == 1 ? st.m1 : st.m2) = clock.value_at(h);
      (parity == 1 ? st.m2 : st.m1) = top;
      st.beta = std::move(rest);
      tr.states.push_back(std::move(st));
      ++li;
    }
    if (!std::isfinite(zeta) || regime_end >= cap) break;  // past the horizon

    // regime switch at the clock's absorption: the type-1 side's current top
    // becomes the new clock, the rest of its skewer the new partition
    auto [new_clock, rest] = split_leftmost(skewer(field, zeta, field.length));
    if (new_clock <= 0.0) {
      tr.degeneration_level = regime_end;
      tr.lifetime = regime_end;
      tr.surviving_label = parity;
      tr.surviving_mass = 0.0;
      break;
    }
    base = regime_end;
    parity = parity == 1 ? 2 : 1;
    ++regimes;
    clock_mass = new_clock;
    other_top = 0.0;
    beta = std::move(rest);
    if (regimes - initial.regime_count > kMaxRegimes)
      throw std::runtime_error("run_type2: regime cap exceeded");
  }

  while (li < n) {
    tr.states.push_back(zero_state(parity, regimes));
    ++li;
  }
  return tr;
}

// ----------------------------------------------------- type 2, interwoven

namespace {

// One side of the interweaving: a type-1 point measure simulated without a
// level cap, keeping the initial spindle's path, the straddle-relevant
// spindles, and the running-maximum jump records.  The alternation only ever
// probes "first time after t that the scaffolding exceeds z" with t and z
// both nondecreasing, and every jump before a probe's start time sits below
// its threshold, so record jumps answer every probe exactly.
struct LeanSide {
  BesqPath f;              // initial spindle path (empty when absent)
  double f_lifetime = 0.0;
  std::vector<FieldPoint> points;              // excludes the initial spindle
  std::vector<std::pair<double, double>> records;  // (time, new max level)
  double length = 0.0;
  bool truncated = false;  // ran into the length budget (failure fallback)
};

// Budget on total scaffolding length per side; passage times to 0 have
// infinite mean, so rare replicates are cut short and treated as failing
// every later probe.
constexpr double kSideLengthBudget = 600.0;

LeanSide build_lean_side(double top, const IntervalPartition& partition,
                         double step, const Truncation& truncation,
                         RngStream& rng) {
  LeanSide s;
  const double rate = spindle_rate(truncation);
  const double comp = compensator_rate(truncation, step);
  double t = 0.0;
  double record = 0.0;

  auto note_jump = [&](double time, double top_level) {
    if (top_level > record) {
      record = top_level;
      s.records.emplace_back(time, top_level);
    }
  };
  // scaffolding from `level` down to first passage of 0
  auto run_descent = [&](double level) {
    double v = level;
    for (;;) {
      if (t >= kSideLengthBudget) {
        s.truncated = true;
        return;
      }
      double wait = rng.exponential(rate);
      double to_zero = v / comp;
      if (to_zero <= wait) {
        t += to_zero;
        return;
      }
      t += wait;
      v -= comp * wait;
      FieldPoint p;
      p.time = t;
      p.birth_level = v;
      p.spindle = sample_truncated_spindle(truncation, step, rng);
      note_jump(t, v + p.spindle.lifetime);
      v += p.spindle.lifetime;
      s.points.push_back(std::move(p));
    }
  };

  auto adaptive = [&](double mass) {
    return std::min(step, std::max(mass / 100.0, step / 64.0));
  };
  if (top > 0.0) {
    s.f = besq_simulate_to_absorption(-1.0, top, adaptive(top), rng);
    s.f_lifetime = s.f.lifetime;
    note_jump(0.0, s.f_lifetime);
    run_descent(s.f_lifetime);
  }
  for (const Block& b : partition.blocks) {
    if (s.truncated) break;
    if (b.mass <= 0.0) continue;
    double bstep = adaptive(b.mass);
    BesqPath broken = besq_simulate_to_absorption(-1.0, b.mass, bstep, rng);
    FieldPoint p;
    p.time = t;
    p.birth_level = 0.0;
    p.spindle.values = broken.values;
    p.spindle.step = bstep;
    p.spindle.lifetime = broken.lifetime;
    p.spindle.broken_start = b.mass;
    note_jump(t, broken.lifetime);
    s.points.push_back(std::move(p));
    run_descent(broken.lifetime);
  }
  s.length = t;
  return s;
}

// first record jump at time >= from with level > z, or nullopt
std::optional<std::pair<double, double>> first_passage_record(
    const LeanSide& s, double from, double z) {
  for (const auto& [time, level] : s.records)
    if (time >= from && level > z) return std::make_pair(time, level);
  return std::nullopt;
}

struct Segment {
  int side = 0;     // 1 or 2
  double t_lo = 0;  // spindles with t_lo < time <= t_hi are included
  double t_hi = kInf;
};

}  // namespace

EvolutionTrace run_type2_interweaving(const Type2State& initial, double lambda,
                                      const std::vector<double>& levels,
                                      double step, const Truncation& truncation,
                                      RngStream& rng) {
  EvolutionTrace tr;
  tr.levels = sorted_levels(levels);
  if (initial.m1 + initial.m2 <= 0.0)
    throw std::invalid_argument("run_type2_interweaving: both tops empty");

  IntervalPartition gamma2 =
      sample_pdip_subordinator(lambda, truncation.parameter, rng).partition;
  LeanSide side1 =
      build_lean_side(initial.m1, initial.beta, step, truncation, rng);
  LeanSide side2 = build_lean_side(initial.m2, gamma2, step, truncation, rng);
  auto side_of = [&](int i) -> const LeanSide& {
    return i == 1 ? side1 : side2;
  };

  // alternating passage recursion: T[j] and Z[j] with T[0] = Z[0] = 0,
  // Z[1] = zeta(f1); odd probes watch side 2, even probes side 1
  std::vector<double> T{0.0};
  std::vector<double> Z{0.0, side1.f_lifetime};
  int j_inf = 0;
  for (int j = 1;; ++j) {
    const LeanSide& probed = side_of(j % 2 == 1 ? 2 : 1);
    double from = j >= 3 ? T[j - 2] : 0.0;
    auto hit = first_passage_record(probed, from, Z[j]);
    if (!hit) {
      j_inf = j;
      break;
    }
    T.push_back(hit->first);
    Z.push_back(hit->second);
  }

  // ordered splice segments: side 2 up to T1, then alternating windows
  std::vector<Segment> segments;
  segments.push_back({2, 0.0, j_inf == 1 ? kInf : T[1]});
  for (int j = 2; j <= j_inf; ++j)
    segments.push_back(
        {j % 2 == 0 ? 1 : 2, T[j - 2], j == j_inf ? kInf : T[j]});

  // death level of the kept portion of each side
  double kept_death[3] = {0.0, side1.f_lifetime, side2.f_lifetime};
  for (const Segment& seg : segments)
    for (const auto& [time, level] : side_of(seg.side).records)
      if (time > seg.t_lo && time <= seg.t_hi)
        kept_death[seg.side] = std::max(kept_death[seg.side], level);
  tr.degeneration_level = std::min(kept_death[1], kept_death[2]);
  tr.lifetime = std::max(kept_death[1], kept_death[2]);
  int survivor = kept_death[1] >= kept_death[2] ? 1 : 2;

  const double h_div = 10.0 * truncation.parameter;
  const double div_scale = std::sqrt(M_PI) * std::sqrt(h_div);

  // state at level y: explicit initial spindles, then the spliced skewer,
  // with the leftmost/second-leftmost masses routed by the parity index
  auto state_at = [&](double y) {
    std::vector<double> masses;
    if (y < side1.f_lifetime) masses.push_back(side1.f.value_at(y));
    if (y < side2.f_lifetime) masses.push_back(side2.f.value_at(y));
    for (const Segment& seg : segments) {
      const LeanSide& s = side_of(seg.side);
      for (const FieldPoint& p : s.points) {
        if (p.time <= seg.t_lo) continue;
        if (p.time > seg.t_hi) break;
        double h = y - p.birth_level;
        if (h <= 0.0 || h >= p.spindle.lifetime) continue;
        double m = p.spindle.value_at(h);
        if (m > 0.0) masses.push_back(m);
      }
    }
    std::size_t j = 0;
    while (j + 1 < Z.size() && Z[j + 1] <= y) ++j;
    int left_label = j % 2 == 0 ? 1 : 2;  // 3 - p(j)

    Type2State st;
    st.regime_parity = left_label == 1 ? 2 : 1;
    st.regime_count = static_cast<long>(j);
    double left = masses.empty() ? 0.0 : masses[0];
    double second = masses.size() > 1 ? masses[1] : 0.0;
    (left_label == 1 ? st.m1 : st.m2) = left;
    (left_label == 1 ? st.m2 : st.m1) = second;
    long count = 0;
    for (std::size_t i = 2; i < masses.size(); ++i) {
      st.beta.blocks.push_back({masses[i], div_scale * count});
      if (masses[i] > h_div) ++count;
    }
    st.beta.total_diversity = div_scale * count;
    return st;
  };

  tr.surviving_label = survivor;
  {
    // surviving mass = the survivor's top at the degeneration level
    Type2State at_d = state_at(tr.degeneration_level);
    tr.surviving_mass = survivor == 1 ? at_d.m1 : at_d.m2;
  }

  for (double y : tr.levels)
    tr.states.push_back(y <= 0.0 ? initial : state_at(y));
  return tr;
}

// ----------------------------------------------------------------- oracles

Type1Kernel kernel_type1_marginal(double block_mass, double y,
                                  const std::vector<double>& probe_lambdas) {
  if (block_mass <= 0.0 || y <= 0.0)
    throw std::invalid_argument("kernel_type1_marginal: bad parameters");
  const double r = 1.0 / (2.0 * y);
  const double b = block_mass;
  Type1Kernel k;
  k.empty_prob = std::exp(-b * r);
  k.gamma_rate = r;
  k.laplace_values.reserve(probe_lambdas.size());
  for (double lam : probe_lambdas) {
    double v = std::sqrt((r + lam) / r) * std::expm1(b * r * r / (r + lam)) /
               std::expm1(b * r);
    k.laplace_values.push_back(v);
  }
  return k;
}

std::optional<DegenerationStats> degeneration_statistics(
    const EvolutionTrace& trace) {
  if (!trace.degenerate()) return std::nullopt;
  DegenerationStats s;
  s.level = trace.degeneration_level;
  s.surviving_label = trace.surviving_label;
  s.surviving_mass = trace.surviving_mass;
  return s;
}

// ------------------------------------------------------- initial samplers

std::pair<double, IntervalPartition> sample_pseudo_stationary_type1(
    double lambda, double block_floor, RngStream& rng) {
  double top = rng.gamma(0.5, lambda);
  IntervalPartition part =
      sample_pdip_subordinator(lambda, block_floor, rng).partition;
  return {top, std::move(part)};
}

Type2State sample_pseudo_stationary_type2(double lambda, double block_floor,
                                          RngStream& rng) {
  Type2State st;
  st.m1 = rng.gamma(0.5, lambda);
  st.m2 = rng.gamma(0.5, lambda);
  st.beta = sample_pdip_subordinator(lambda, block_floor, rng).partition;
  return st;
}

// ------------------------------------------------------------------- csv

std::string EvolutionTrace::to_csv() const {
  std::ostringstream out;
  out << "# degeneration_level=" << degeneration_level
      << ", lifetime=" << lifetime << ", surviving_label=" << surviving_label
      << ", surviving_mass=" << surviving_mass << "\n";
  out << "level,m1,m2,partition_mass,partition_total_diversity,n_blocks,"
         "regime_parity\n";
  for (std::size_t i = 0; i < levels.size() && i < states.size(); ++i) {
    const Type2State& st = states[i];
    out << levels[i] << ',' << st.m1 << ',' << st.m2 << ','
        << st.beta.total_mass() << ',' << st.beta.total_diversity << ','
        << st.beta.blocks.size() << ',' << st.regime_parity << "\n";
  }
  return out.str();
}

}  // namespace aldous
