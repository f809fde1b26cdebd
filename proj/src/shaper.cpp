#include "pumpshape/shaper.hpp"

#include <algorithm>
#include <map>
#include <cmath>
#include <numbers>

#include "pumpshape/kernels.hpp"

namespace pumpshape {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

}  // namespace

SegmentTiling make_tiling(std::size_t grid, std::size_t per_side, std::size_t aperture) {
  if (per_side == 0) throw DomainError("tiling needs at least one segment");
  if (aperture < per_side || aperture > grid) {
    throw ConfigError("segmented aperture must hold at least one sample per segment and fit the grid");
  }
  SegmentTiling t;
  t.grid = grid;
  t.per_side = per_side;
  t.aperture = aperture;
  t.origin = (grid - aperture) / 2;
  t.index.assign(grid * grid, -1);
  for (std::size_t i = 0; i < aperture; ++i) {
    const std::size_t sr = i * per_side / aperture;
    for (std::size_t j = 0; j < aperture; ++j) {
      const std::size_t sc = j * per_side / aperture;
      t.index[(t.origin + i) * grid + t.origin + j] = static_cast<std::int32_t>(sr * per_side + sc);
    }
  }
  return t;
}

SegmentTiling make_tiling_for_beam(std::size_t grid, std::size_t per_side, double dx, double waist,
                                   double aperture_waists) {
  const auto samples = static_cast<std::size_t>(std::lround(aperture_waists * waist / dx));
  return make_tiling(grid, per_side, std::min(samples, grid));
}

ControlState ControlState::flat(SegmentTiling tiling) {
  ControlState s;
  s.phases.assign(tiling.segment_count(), 0.0);
  s.tiling = std::move(tiling);
  return s;
}

PhaseScreen ControlState::render(double dx) const {
  PhaseScreen p = flat_screen(tiling.grid, dx);
  for (std::size_t i = 0; i < tiling.index.size(); ++i) {
    if (tiling.index[i] >= 0) p.phase[i] = phases[static_cast<std::size_t>(tiling.index[i])];
  }
  return p;
}

std::string feedback_mode_name(FeedbackMode m) {
  switch (m) {
    case FeedbackMode::pump_noiseless: return "pump_noiseless";
    case FeedbackMode::pump_camera: return "pump_camera";
    case FeedbackMode::coincidence_counts: return "coincidence_counts";
  }
  return "unknown";
}

FeedbackMode parse_feedback_mode(const std::string& s) {
  if (s == "pump_noiseless") return FeedbackMode::pump_noiseless;
  if (s == "pump_camera") return FeedbackMode::pump_camera;
  if (s == "coincidence_counts") return FeedbackMode::coincidence_counts;
  throw ConfigError("unknown feedback mode: " + s);
}

void FeedbackSpec::validate() const {
  if (mode == FeedbackMode::coincidence_counts && !(exposure > 0.0)) {
    throw ConfigError("coincidence feedback needs a positive exposure per probe");
  }
}

TransferFeedback::TransferFeedback(const SegmentTiling& tiling, std::size_t pad,
                                   std::vector<Observation::Term> weights, NoiseModel noise)
    : tiling_(tiling), pad_(pad), weights_(std::move(weights)), noise_(noise), rng_(noise.seed) {
  if (!is_power_of_two(pad_)) throw DomainError("padding must be a power of two");
}

void TransferFeedback::bind(const ComplexField& incident) {
  const std::size_t n = tiling_.grid;
  if (incident.size() != n) throw ShapeError("incident field does not match the tiling grid");
  const std::size_t m = pad_ * n;
  const std::size_t segs = tiling_.segment_count();
  const auto mm = static_cast<long long>(m);
  const auto half_m = static_cast<long long>(m / 2);
  const auto half_n = static_cast<long long>(n / 2);
  const double norm = incident.dx / static_cast<double>(m);

  transfer_.assign(weights_.size() * segs, {0.0, 0.0});
  constant_.assign(weights_.size(), {0.0, 0.0});
  phasors_.resize(segs);

  // exp(-2 pi i (u - m/2)(r - n/2) / m), reduced modulo m before the angle is
  // formed so large grids keep full precision.
  auto factors = [&](long long u, std::vector<std::complex<double>>& out) {
    out.resize(n);
    for (std::size_t r = 0; r < n; ++r) {
      long long k = ((u - half_m) * (static_cast<long long>(r) - half_n)) % mm;
      if (k < 0) k += mm;
      const double a = -kTwoPi * static_cast<double>(k) / static_cast<double>(m);
      out[r] = {std::cos(a), std::sin(a)};
    }
  };

  const std::size_t side = tiling_.per_side;
  // Segments are products of row and column blocks, so the sum over a
  // segment factorises once the column phase of a probed sample is fixed.
  std::vector<long long> row_block(n, -1);
  bool separable = side > 0;
  for (std::size_t r = 0; r < n && separable; ++r) {
    const std::int32_t* idx = tiling_.index.data() + r * n;
    for (std::size_t col = 0; col < n; ++col) {
      if (idx[col] < 0) continue;
      const auto b = static_cast<long long>(static_cast<std::size_t>(idx[col]) / side);
      if (row_block[r] < 0) row_block[r] = b;
      if (row_block[r] != b) {
        separable = false;
        break;
      }
    }
  }

  std::vector<std::complex<double>> ey, ex, rowbuf(n);
  if (!separable) {
    for (std::size_t qi = 0; qi < weights_.size(); ++qi) {
      const std::size_t q = weights_[qi].first;
      if (q >= m * m) throw RangeError("probed sample outside the far-field grid");
      factors(static_cast<long long>(q / m), ey);
      factors(static_cast<long long>(q % m), ex);
      auto* t = transfer_.data() + qi * segs;
      std::complex<double> c{0.0, 0.0};
      for (std::size_t r = 0; r < n; ++r) {
        const auto arow = incident.amplitude.row(r);
        std::copy(arow.begin(), arow.end(), rowbuf.begin());
        kernels::active().cmul(rowbuf, ex);
        const std::int32_t* idx = tiling_.index.data() + r * n;
        for (std::size_t col = 0; col < n; ++col) {
          const auto v = rowbuf[col] * ey[r];
          if (idx[col] < 0) {
            c += v;
          } else {
            t[idx[col]] += v;
          }
        }
      }
      for (std::size_t s = 0; s < segs; ++s) t[s] *= norm;
      constant_[qi] = c * norm;
    }
    return;
  }

  std::map<std::size_t, std::vector<std::size_t>> by_column;
  for (std::size_t qi = 0; qi < weights_.size(); ++qi) {
    const std::size_t q = weights_[qi].first;
    if (q >= m * m) throw RangeError("probed sample outside the far-field grid");
    by_column[q % m].push_back(qi);
  }
  std::vector<std::complex<double>> partial(n * side), outside(n);
  for (const auto& [u, probes] : by_column) {
    factors(static_cast<long long>(u), ex);
    std::fill(partial.begin(), partial.end(), std::complex<double>{0.0, 0.0});
    for (std::size_t r = 0; r < n; ++r) {
      const auto arow = incident.amplitude.row(r);
      std::copy(arow.begin(), arow.end(), rowbuf.begin());
      kernels::active().cmul(rowbuf, ex);
      const std::int32_t* idx = tiling_.index.data() + r * n;
      std::complex<double> o{0.0, 0.0};
      auto* pr = partial.data() + r * side;
      for (std::size_t col = 0; col < n; ++col) {
        if (idx[col] < 0) {
          o += rowbuf[col];
        } else {
          pr[static_cast<std::size_t>(idx[col]) % side] += rowbuf[col];
        }
      }
      outside[r] = o;
    }
    for (std::size_t qi : probes) {
      factors(static_cast<long long>(weights_[qi].first / m), ey);
      auto* t = transfer_.data() + qi * segs;
      std::complex<double> c{0.0, 0.0};
      for (std::size_t r = 0; r < n; ++r) {
        c += outside[r] * ey[r];
        if (row_block[r] < 0) continue;
        auto* tr = t + static_cast<std::size_t>(row_block[r]) * side;
        const auto* pr = partial.data() + r * side;
        for (std::size_t j = 0; j < side; ++j) tr[j] += pr[j] * ey[r];
      }
      for (std::size_t s = 0; s < segs; ++s) t[s] *= norm;
      constant_[qi] = c * norm;
    }
  }
}

double TransferFeedback::expected(std::span<const double> phases) const {
  const std::size_t segs = tiling_.segment_count();
  if (phases.size() != segs) throw ShapeError("phase vector does not match segment count");
  if (constant_.size() != weights_.size()) throw StateError("transfer feedback not bound to a field");
  for (std::size_t s = 0; s < segs; ++s) phasors_[s] = {std::cos(phases[s]), std::sin(phases[s])};
  const auto& k = kernels::active();
  double signal = 0.0;
  for (std::size_t qi = 0; qi < weights_.size(); ++qi) {
    const auto e = constant_[qi] + k.cdot({transfer_.data() + qi * segs, segs}, phasors_);
    signal += weights_[qi].second * std::norm(e);
  }
  return signal;
}

std::vector<double> Feedback::measure_probes(std::span<const double> phases,
                                             std::span<const std::size_t> selected,
                                             std::span<const double> offsets) {
  std::vector<double> trial(phases.begin(), phases.end());
  std::vector<double> out;
  out.reserve(offsets.size());
  for (double theta : offsets) {
    for (std::size_t s : selected) trial[s] = phases[s] + theta;
    out.push_back(measure(trial));
  }
  return out;
}

double TransferFeedback::sample(double expected_signal) {
  const double mean = noise_.scale * expected_signal + noise_.offset;
  if (!noise_.poisson) return mean;
  if (!(mean > 0.0)) return 0.0;
  std::poisson_distribution<long long> dist(mean);
  return static_cast<double>(dist(rng_));
}

double TransferFeedback::measure(std::span<const double> phases) { return sample(expected(phases)); }

std::vector<double> TransferFeedback::measure_probes(std::span<const double> phases,
                                                     std::span<const std::size_t> selected,
                                                     std::span<const double> offsets) {
  const std::size_t segs = tiling_.segment_count();
  if (phases.size() != segs) throw ShapeError("phase vector does not match segment count");
  if (constant_.size() != weights_.size()) throw StateError("transfer feedback not bound to a field");
  // Split each probed amplitude into the fixed part and the stepped part.
  std::vector<std::complex<double>> moving(segs, {0.0, 0.0});
  for (std::size_t s = 0; s < segs; ++s) phasors_[s] = {std::cos(phases[s]), std::sin(phases[s])};
  for (std::size_t s : selected) {
    if (s >= segs) throw RangeError("selected segment out of range");
    std::swap(moving[s], phasors_[s]);
  }
  const auto& k = kernels::active();
  std::vector<std::complex<double>> fixed(weights_.size()), stepped(weights_.size());
  for (std::size_t qi = 0; qi < weights_.size(); ++qi) {
    const std::span<const std::complex<double>> row{transfer_.data() + qi * segs, segs};
    fixed[qi] = constant_[qi] + k.cdot(row, phasors_);
    stepped[qi] = k.cdot(row, moving);
  }
  std::vector<double> out;
  out.reserve(offsets.size());
  for (double theta : offsets) {
    const std::complex<double> rot{std::cos(theta), std::sin(theta)};
    double signal = 0.0;
    for (std::size_t qi = 0; qi < weights_.size(); ++qi) {
      signal += weights_[qi].second * std::norm(fixed[qi] + stepped[qi] * rot);
    }
    out.push_back(sample(signal));
  }
  return out;
}

HarmonicFit fit_first_harmonic(std::span<const double> values) {
  const std::size_t n = values.size();
  if (n < 3) throw DomainError("phase stepping needs at least three probes");
  std::complex<double> z{0.0, 0.0};
  double sum = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double theta = kTwoPi * static_cast<double>(j) / static_cast<double>(n);
    z += values[j] * std::complex<double>(std::cos(theta), std::sin(theta));
    sum += values[j];
  }
  HarmonicFit fit;
  fit.offset = sum / static_cast<double>(n);
  fit.amplitude = 2.0 * std::abs(z) / static_cast<double>(n);
  const bool all_zero = std::all_of(values.begin(), values.end(), [](double v) { return v == 0.0; });
  if (all_zero || fit.amplitude < 1e-12 * std::abs(fit.offset) || fit.amplitude == 0.0) {
    fit.degenerate = true;
    fit.phase = 0.0;
  } else {
    fit.phase = std::arg(z);
  }
  return fit;
}

namespace {

std::vector<std::size_t> random_half(std::size_t count, std::mt19937_64& rng) {
  std::vector<std::size_t> idx(count);
  for (std::size_t i = 0; i < count; ++i) idx[i] = i;
  const std::size_t half = count / 2 == 0 ? count : count / 2;
  for (std::size_t i = 0; i < half; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, count - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(half);
  std::sort(idx.begin(), idx.end());
  return idx;
}

HarmonicFit step(ControlState& state, Feedback& feedback, std::size_t n_phases,
                 std::mt19937_64& rng) {
  if (n_phases < 3) throw DomainError("phase stepping needs at least three probes");
  const auto selected = random_half(state.phases.size(), rng);
  std::vector<double> thetas(n_phases);
  for (std::size_t j = 0; j < n_phases; ++j) {
    thetas[j] = kTwoPi * static_cast<double>(j) / static_cast<double>(n_phases);
  }
  const std::vector<double> values = feedback.measure_probes(state.phases, selected, thetas);
  if (values.size() != n_phases) throw StateError("feedback returned the wrong number of probes");
  for (std::size_t j = 0; j < n_phases; ++j) {
    if (feedback.noiseless() && values[j] < 0.0) {
      throw DomainError("noiseless feedback returned a negative value");
    }
    state.trace.push_back({state.trace.size(), state.iterations, thetas[j], values[j]});
  }
  const HarmonicFit fit = fit_first_harmonic(values);
  if (!fit.degenerate) {
    for (std::size_t s : selected) state.phases[s] += fit.phase;
  }
  ++state.iterations;
  return fit;
}

}  // namespace

void partition_iteration(ControlState& state, Feedback& feedback, std::size_t n_phases,
                         std::mt19937_64& rng) {
  step(state, feedback, n_phases, rng);
}

void run_optimization(ControlState& state, Feedback& feedback, const OptimizationOptions& opts,
                      std::mt19937_64& rng) {
  if (opts.budget == 0) throw DomainError("optimisation budget must be positive");
  if (opts.target_enhancement && !(opts.baseline > 0.0)) {
    throw DomainError("a target enhancement needs a positive baseline");
  }
  std::size_t used = 0;
  while (used + opts.n_phases <= opts.budget) {
    const HarmonicFit fit = step(state, feedback, opts.n_phases, rng);
    used += opts.n_phases;
    if (opts.target_enhancement &&
        fit.offset + fit.amplitude >= *opts.target_enhancement * opts.baseline) {
      break;
    }
  }
}

ModeOverlay parse_mode_overlay(const std::string& s) {
  if (s == "pi_step_horizontal") return ModeOverlay::pi_step_horizontal;
  if (s == "pi_step_vertical") return ModeOverlay::pi_step_vertical;
  throw ConfigError("unknown mode overlay: " + s);
}

ControlState add_mode_overlay(ControlState state, ModeOverlay mode) {
  const std::size_t s = state.tiling.per_side;
  for (std::size_t seg = 0; seg < state.phases.size(); ++seg) {
    const std::size_t coord =
        mode == ModeOverlay::pi_step_horizontal ? state.tiling.segment_col(seg) : state.tiling.segment_row(seg);
    if (coord >= s / 2) state.phases[seg] += std::numbers::pi;
  }
  return state;
}

}  // namespace pumpshape
