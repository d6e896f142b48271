#include "aldous/scaffolding.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <stdexcept>

#include "aldous/besq.hpp"

namespace aldous {

// ---------------------------------------------------------------- spindles

namespace {

// linear interpolation of a grid over normalized time u in [0,1]
double interp_normalized(const std::vector<double>& grid, double u) {
  if (u <= 0.0) return grid.front();
  if (u >= 1.0) return grid.back();
  double pos = u * static_cast<double>(grid.size() - 1);
  std::size_t i = static_cast<std::size_t>(pos);
  double frac = pos - static_cast<double>(i);
  return grid[i] * (1.0 - frac) + grid[i + 1] * frac;
}

}  // namespace

double Spindle::value_at(double h) const {
  if (h >= lifetime) return 0.0;
  if (rise != nullptr) {
    double rise_dur = height * rise->duration;
    if (h < rise_dur)
      return height * interp_normalized(rise->values, h / rise_dur);
    return fall_scale *
           interp_normalized(fall->values, (h - rise_dur) / fall_lifetime);
  }
  if (full_shape != nullptr)
    return lifetime * interp_normalized(*full_shape, h / lifetime);
  if (h <= 0.0) return values.empty() ? 0.0 : values.front();
  double pos = h / step;
  std::size_t i = static_cast<std::size_t>(pos);
  if (i + 1 >= values.size())
    // beyond the stored grid: only possible for cap-truncated spindles
    return values.empty() ? 0.0 : values.back();
  double frac = pos - static_cast<double>(i);
  return values[i] * (1.0 - frac) + values[i + 1] * frac;
}

double Spindle::max_value() const {
  if (rise != nullptr) {
    double m = 0.0;
    for (double v : fall->values) m = std::max(m, v);
    return std::max(height * rise->end_value, fall_scale * m);
  }
  if (full_shape != nullptr) {
    double m = 0.0;
    for (double v : *full_shape) m = std::max(m, v);
    return m * lifetime;
  }
  double m = 0.0;
  for (double v : values) m = std::max(m, v);
  return m;
}

double SpindleField::max_level() const {
  double m = initial_level;
  for (const FieldPoint& p : points)
    m = std::max(m, p.birth_level + p.spindle.lifetime);
  return m;
}

// ---------------------------------------------------------------- rates

double spindle_rate(const Truncation& t) {
  if (t.parameter <= 0.0) throw std::invalid_argument("spindle_rate: bad parameter");
  if (t.mode == TruncationMode::height)
    return 1.5 / std::sqrt(M_PI) * std::pow(t.parameter, -1.5);
  return std::pow(t.parameter, -1.5) / std::sqrt(2.0 * M_PI);
}

double analytic_height_compensator(double b) {
  // rate x mean included lifetime b/5 + b = 6b/5
  return 1.8 / std::sqrt(M_PI) / std::sqrt(b);
}

namespace {

constexpr int kShapeGrid = 128;  // shapes stored on kShapeGrid+1 points

struct SpindleLibraries {
  std::vector<RiseShape> rises;
  std::vector<FallShape> falls;  // sorted by natural duration
  double mean_rise_duration = 0.0;
  double mean_rise_end = 0.0;
};

// Shared shape libraries behind the lazy height-mode spindles, built once
// per process from a fixed internal stream.  The ascent shapes are exact up
// to their fine internal step (relative step after scaling by b is
// 1e-4 * b); the decay shapes are reused across spindles while the decay
// *durations* are sampled fresh and exactly per spindle.
const SpindleLibraries& spindle_libraries() {
  static const SpindleLibraries libs = [] {
    SpindleLibraries out;
    RngStream rng(0x11b5a9e5ULL, 0);
    constexpr int kRises = 2048;
    constexpr int kFalls = 2048;
    constexpr double kStep = 1e-4;
    out.rises.reserve(kRises);
    for (int i = 0; i < kRises; ++i) {
      BesqPath p = besq5_first_passage(1.0, kStep, rng);
      RiseShape r;
      r.duration = static_cast<double>(p.values.size() - 1) * kStep;
      r.end_value = p.values.back();
      r.values.resize(kShapeGrid + 1);
      for (int g = 0; g <= kShapeGrid; ++g)
        r.values[g] = p.value_at(r.duration * g / kShapeGrid);
      r.values.front() = 0.0;
      r.values.back() = r.end_value;
      out.mean_rise_duration += r.duration;
      out.mean_rise_end += r.end_value;
      out.rises.push_back(std::move(r));
    }
    out.mean_rise_duration /= kRises;
    out.mean_rise_end /= kRises;
    out.falls.reserve(kFalls);
    for (int i = 0; i < kFalls; ++i) {
      BesqPath p = besq_simulate_to_absorption(-1.0, 1.0, kStep, rng);
      FallShape g;
      g.duration = p.lifetime;
      g.values.resize(kShapeGrid + 1);
      for (int k = 0; k <= kShapeGrid; ++k)
        g.values[k] = p.value_at(p.lifetime * k / kShapeGrid);
      g.values.front() = 1.0;
      g.values.back() = 0.0;
      out.falls.push_back(std::move(g));
    }
    std::sort(out.falls.begin(), out.falls.end(),
              [](const FallShape& a, const FallShape& b) {
                return a.duration < b.duration;
              });
    return out;
  }();
  return libs;
}

}  // namespace

double compensator_rate(const Truncation& t, double /*step*/) {
  if (t.parameter <= 0.0)
    throw std::invalid_argument("compensator_rate: bad parameter");
  if (t.mode == TruncationMode::height) {
    const SpindleLibraries& libs = spindle_libraries();
    // mean composite lifetime: b (mean ascent duration) +
    // E[b * end * 1/(2G)] with E[1/(2G)] = 1
    return spindle_rate(t) * t.parameter *
           (libs.mean_rise_duration + libs.mean_rise_end);
  }
  return 3.0 / (M_PI * std::sqrt(2.0)) / std::sqrt(t.parameter);
}

// ---------------------------------------------------------------- samplers

Spindle sample_excursion_above(double b, double step, RngStream& rng,
                               double max_lifetime) {
  BesqPath rise = besq5_first_passage(b, step, rng);
  double rise_time = static_cast<double>(rise.values.size() - 1) * step;
  BesqPath fall;
  bool capped = false;
  if (max_lifetime > 0.0) {
    double horizon = std::max(max_lifetime - rise_time, 2.0 * step);
    fall = besq_simulate(-1.0, rise.values.back(), step, horizon, rng);
    capped = !fall.absorbed();
  } else {
    fall = besq_simulate_to_absorption(-1.0, rise.values.back(), step, rng);
  }
  Spindle s;
  s.step = step;
  s.values = rise.values;
  s.values.insert(s.values.end(), fall.values.begin() + 1, fall.values.end());
  s.lifetime = capped ? std::numeric_limits<double>::infinity()
                      : static_cast<double>(s.values.size() - 1) * step;
  return s;
}

namespace {

// Unit-lifetime spindle shapes, used wherever a spindle of prescribed
// lifetime needs an interior.  The excursion conditioned on its lifetime is
// a squared Bessel bridge of dimension 4 - delta = 5 from 0 to 0, i.e. the
// sum of five independent squared Brownian bridges, sampled exactly at the
// grid points (no time-discretization error; between grid points the shape
// is interpolated linearly).
const std::vector<std::vector<double>>& unit_spindle_library() {
  static const std::vector<std::vector<double>> lib = [] {
    constexpr int kCount = 1024;
    constexpr int kGrid = 256;
    RngStream rng(0x5eedfaceULL, 0);
    std::vector<std::vector<double>> out;
    out.reserve(kCount);
    std::vector<double> walk(kGrid + 1);
    for (int i = 0; i < kCount; ++i) {
      std::vector<double> shape(kGrid + 1, 0.0);
      for (int d = 0; d < 5; ++d) {
        walk[0] = 0.0;
        for (int g = 1; g <= kGrid; ++g)
          walk[g] = walk[g - 1] + rng.normal() / std::sqrt(double(kGrid));
        for (int g = 0; g <= kGrid; ++g) {
          double bridge = walk[g] - (double(g) / kGrid) * walk[kGrid];
          shape[g] += bridge * bridge;
        }
      }
      shape.front() = 0.0;
      shape.back() = 0.0;
      out.push_back(std::move(shape));
    }
    return out;
  }();
  return lib;
}

}  // namespace

Spindle sample_spindle_with_lifetime(double lifetime, RngStream& rng) {
  if (lifetime <= 0.0)
    throw std::invalid_argument("sample_spindle_with_lifetime: lifetime <= 0");
  const auto& lib = unit_spindle_library();
  Spindle s;
  s.lifetime = lifetime;
  s.full_shape = &lib[rng.uniform_int(lib.size())];
  return s;
}

Spindle sample_truncated_spindle(const Truncation& trunc, double /*step*/,
                                 RngStream& rng) {
  if (trunc.mode == TruncationMode::height) {
    const SpindleLibraries& libs = spindle_libraries();
    Spindle s;
    s.height = trunc.parameter;
    const RiseShape& rise = libs.rises[rng.uniform_int(libs.rises.size())];
    double fall_start = s.height * rise.end_value;
    double fall_lifetime = fall_start / (2.0 * rng.gamma(1.5, 1.0));
    double lifetime = s.height * rise.duration + fall_lifetime;
    // decay shape with natural duration nearest the sampled aspect ratio;
    // value scale follows BESQ scaling, so interiors carry the right order
    double aspect = fall_lifetime / fall_start;
    if (aspect > 5.0)
      // long-lived relative to the truncation height: the height
      // conditioning is immaterial and the scaled Bessel bridge is the
      // exact shape law given the lifetime
      return sample_spindle_with_lifetime(lifetime, rng);
    auto it = std::lower_bound(libs.falls.begin(), libs.falls.end(), aspect,
                               [](const FallShape& f, double a) {
                                 return f.duration < a;
                               });
    if (it != libs.falls.begin() &&
        aspect - std::prev(it)->duration < it->duration - aspect)
      --it;
    s.rise = &rise;
    s.fall = &*it;
    s.fall_lifetime = fall_lifetime;
    s.fall_scale = fall_lifetime / it->duration;
    s.lifetime = lifetime;
    return s;
  }
  // lifetime tail ~ x^{-3/2} above eps: inverse-transform eps U^{-2/3}
  double u = rng.uniform();
  while (u <= 0.0) u = rng.uniform();
  return sample_spindle_with_lifetime(trunc.parameter * std::pow(u, -2.0 / 3.0),
                                      rng);
}

SpindleField sample_prm_field(double length, const Truncation& truncation,
                              double step, RngStream& rng) {
  if (length <= 0.0) throw std::invalid_argument("sample_prm_field: length <= 0");
  SpindleField f;
  f.length = length;
  f.truncation = truncation;
  f.compensator_rate = compensator_rate(truncation, step);
  long n = rng.poisson(spindle_rate(truncation) * length);
  std::vector<double> times(static_cast<std::size_t>(n));
  for (double& t : times) t = rng.uniform(0.0, length);
  std::sort(times.begin(), times.end());
  double jumps = 0.0;
  for (double t : times) {
    FieldPoint p;
    p.time = t;
    p.spindle = sample_truncated_spindle(truncation, step, rng);
    p.birth_level = jumps - f.compensator_rate * t;
    jumps += p.spindle.lifetime;
    f.points.push_back(std::move(p));
  }
  return f;
}

double scaffolding_value(const SpindleField& field, double t) {
  if (t < 0.0 || t > field.length + 1e-12)
    throw std::out_of_range("scaffolding_value: t outside [0, length]");
  double jumps = 0.0;
  for (const FieldPoint& p : field.points) {
    if (p.time > t) break;
    jumps += p.spindle.lifetime;
  }
  return field.initial_level + jumps - field.compensator_rate * t;
}

IntervalPartition skewer(const SpindleField& field, double y, double t,
                         double h_div) {
  IntervalPartition out;
  for (const FieldPoint& p : field.points) {
    if (p.time > t) break;
    double h = y - p.birth_level;
    if (h <= 0.0 || h >= p.spindle.lifetime) continue;
    double mass = p.spindle.value_at(h);
    if (mass <= 0.0) continue;
    out.blocks.push_back({mass, 0.0});
  }
  double h = h_div > 0.0 ? h_div : 10.0 * field.truncation.parameter;
  const double scale = std::sqrt(M_PI) * std::sqrt(h);
  long count = 0;
  for (Block& b : out.blocks) {
    b.left_diversity = scale * static_cast<double>(count);
    if (b.mass > h) ++count;
  }
  out.total_diversity = scale * static_cast<double>(count);
  return out;
}

namespace {

// Run PRM arrivals until the scaffolding, started at `level`, drifts down
// through 0.  Downward movement is continuous, so the passage time is exact.
// A positive level_cap teleports the scaffolding from above the cap back to
// it (the elided excursion only contains spindles born above the cap).
void run_to_first_passage(SpindleField& f, double level, double step,
                          RngStream& rng, double level_cap) {
  const double rate = spindle_rate(f.truncation);
  double t = f.points.empty() ? 0.0 : f.points.back().time;
  double v = level;
  if (level_cap > 0.0 && v > level_cap) v = level_cap;
  for (;;) {
    double wait = rng.exponential(rate);
    double to_zero = v / f.compensator_rate;
    if (to_zero <= wait) {
      f.length = t + to_zero;
      return;
    }
    t += wait;
    v -= f.compensator_rate * wait;
    FieldPoint p;
    p.time = t;
    p.spindle = sample_truncated_spindle(f.truncation, step, rng);
    p.birth_level = v;
    v += p.spindle.lifetime;
    if (level_cap > 0.0 && v > level_cap) v = level_cap;
    f.points.push_back(std::move(p));
  }
}

}  // namespace

SpindleField clade(double initial_mass, double step, const Truncation& truncation,
                   RngStream& rng, double level_cap) {
  if (initial_mass <= 0.0) throw std::invalid_argument("clade: initial mass <= 0");
  SpindleField f;
  f.truncation = truncation;
  f.compensator_rate = compensator_rate(truncation, step);
  // the Euler lifetime bias is governed by the step relative to the initial
  // mass, so small broken spindles get a proportionally finer step
  double bstep = std::min(step, std::max(initial_mass / 100.0, step / 64.0));
  BesqPath broken =
      level_cap > 0.0
          ? besq_simulate(-1.0, initial_mass, bstep,
                          std::max(level_cap, 2.0 * bstep), rng)
          : besq_simulate_to_absorption(-1.0, initial_mass, bstep, rng);
  FieldPoint p0;
  p0.time = 0.0;
  p0.birth_level = 0.0;
  p0.spindle.values = broken.values;
  p0.spindle.step = bstep;
  p0.spindle.lifetime = broken.lifetime;  // +inf when still alive at the cap
  p0.spindle.broken_start = initial_mass;
  f.points.push_back(std::move(p0));
  run_to_first_passage(f, f.points.front().spindle.lifetime, step, rng,
                       level_cap);
  return f;
}

SpindleField descent_field(double height, double step,
                           const Truncation& truncation, RngStream& rng,
                           double level_cap) {
  if (height <= 0.0) throw std::invalid_argument("descent_field: height <= 0");
  SpindleField f;
  f.truncation = truncation;
  f.compensator_rate = compensator_rate(truncation, step);
  f.initial_level = height;
  run_to_first_passage(f, height, step, rng, level_cap);
  return f;
}

SpindleField concatenate_fields(const SpindleField& left,
                                const SpindleField& right) {
  SpindleField out = left;
  out.points.reserve(left.points.size() + right.points.size());
  for (const FieldPoint& p : right.points) {
    FieldPoint q = p;
    q.time += left.length;
    out.points.push_back(std::move(q));
  }
  out.length = left.length + right.length;
  return out;
}

SpindleField type1_point_measure(const IntervalPartition& initial, double step,
                                 const Truncation& truncation, RngStream& rng,
                                 double level_cap) {
  SpindleField out;
  out.truncation = truncation;
  out.compensator_rate = compensator_rate(truncation, step);
  bool first = true;
  for (const Block& b : initial.blocks) {
    if (b.mass <= 0.0) continue;
    SpindleField c = clade(b.mass, step, truncation, rng, level_cap);
    if (first) {
      out = std::move(c);
      first = false;
    } else {
      out = concatenate_fields(out, c);
    }
  }
  return out;
}

}  // namespace aldous
