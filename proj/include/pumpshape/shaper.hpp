#pragma once

// Partitioning wavefront optimisation over a segmented control phase. Each
// iteration phase-steps a random half of the segments through n evenly spaced
// test phases, fits the sinusoidal response from its first discrete harmonic,
// and keeps the best step.

#include <complex>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "pumpshape/detection.hpp"
#include "pumpshape/field_optics.hpp"

namespace pumpshape {

/// S x S macro-pixels over a centred square of the control grid. Samples
/// outside the square are unsegmented and carry phase 0.
struct SegmentTiling {
  std::size_t grid = 0;
  std::size_t per_side = 0;
  std::size_t aperture = 0;  ///< samples per side of the segmented square
  std::size_t origin = 0;    ///< first row/col of the square
  std::vector<std::int32_t> index;

  std::size_t segment_count() const noexcept { return per_side * per_side; }
  std::size_t segment_row(std::size_t seg) const noexcept { return seg / per_side; }
  std::size_t segment_col(std::size_t seg) const noexcept { return seg % per_side; }
};

SegmentTiling make_tiling(std::size_t grid, std::size_t per_side, std::size_t aperture);
/// Square of side round(aperture_waists * waist / dx), clamped to the grid.
SegmentTiling make_tiling_for_beam(std::size_t grid, std::size_t per_side, double dx,
                                   double waist, double aperture_waists = 3.0);

struct TraceEntry {
  std::size_t measurement = 0;
  std::size_t iteration = 0;
  double probe_phase = 0.0;
  double value = 0.0;
};

struct ControlState {
  SegmentTiling tiling;
  std::vector<double> phases;  ///< unwrapped, one per segment
  std::size_t iterations = 0;
  std::vector<TraceEntry> trace;

  static ControlState flat(SegmentTiling tiling);
  /// Phase map on the control grid.
  PhaseScreen render(double dx) const;
};

enum class FeedbackMode { pump_noiseless, pump_camera, coincidence_counts };

std::string feedback_mode_name(FeedbackMode m);
FeedbackMode parse_feedback_mode(const std::string& s);

struct FeedbackSpec {
  FeedbackMode mode = FeedbackMode::pump_noiseless;
  std::string target = "reference";  ///< identifier of the target mask
  double exposure = 0.0;             ///< per probe, s; coincidence mode only

  void validate() const;
};

class Feedback {
 public:
  virtual ~Feedback() = default;
  /// One measurement with the given segment phases applied.
  virtual double measure(std::span<const double> phases) = 0;
  virtual bool noiseless() const = 0;
  /// Measurements with `offsets[j]` added to the `selected` segments of
  /// `phases`, in order. Equivalent to repeated measure() calls.
  virtual std::vector<double> measure_probes(std::span<const double> phases,
                                             std::span<const std::size_t> selected,
                                             std::span<const double> offsets);
};

/// Wraps a callable; used for synthetic responses and full-pipeline checks.
class FunctionFeedback final : public Feedback {
 public:
  FunctionFeedback(std::function<double(std::span<const double>)> fn, bool noiseless)
      : fn_(std::move(fn)), noiseless_(noiseless) {}
  double measure(std::span<const double> phases) override { return fn_(phases); }
  bool noiseless() const override { return noiseless_; }

 private:
  std::function<double(std::span<const double>)> fn_;
  bool noiseless_;
};

/// Maps the expected signal to a measurement: scale * signal + offset, then
/// Poisson-sampled unless noiseless.
struct NoiseModel {
  bool poisson = false;
  double scale = 1.0;
  double offset = 0.0;
  std::uint64_t seed = 0;
};

/// Feedback from a weighted sum of far-field samples. The field at each probed
/// sample is linear in the segment phasors, so the transform from segments to
/// probed samples is precomputed once per incident field:
///   E_q = c_q + sum_s T_qs exp(i theta_s),  signal = sum_q w_q |E_q|^2,
/// with exactly the normalisation and sample positions of far_field().
class TransferFeedback final : public Feedback {
 public:
  TransferFeedback(const SegmentTiling& tiling, std::size_t pad,
                   std::vector<Observation::Term> weights, NoiseModel noise);

  /// Recompute the transfer for a new incident field (control plane, before
  /// the control phase). Keeps the noise generator running.
  void bind(const ComplexField& incident);

  double expected(std::span<const double> phases) const;
  double measure(std::span<const double> phases) override;
  std::vector<double> measure_probes(std::span<const double> phases,
                                     std::span<const std::size_t> selected,
                                     std::span<const double> offsets) override;
  bool noiseless() const override { return !noise_.poisson; }
  std::size_t probed_samples() const noexcept { return weights_.size(); }

 private:
  SegmentTiling tiling_;
  std::size_t pad_;
  std::vector<Observation::Term> weights_;
  NoiseModel noise_;
  std::mt19937_64 rng_;
  std::vector<std::complex<double>> transfer_;  // probed sample major
  std::vector<std::complex<double>> constant_;
  mutable std::vector<std::complex<double>> phasors_;

  double sample(double expected_signal);
};

struct HarmonicFit {
  double offset = 0.0;     ///< A
  double amplitude = 0.0;  ///< B
  double phase = 0.0;      ///< theta*, maximiser of A + B cos(theta - theta*)
  bool degenerate = false;
};

/// First-harmonic fit of samples at theta_j = 2 pi j / n, n >= 3. Degenerate
/// (zero correction) when all samples vanish or B < 1e-12 A.
HarmonicFit fit_first_harmonic(std::span<const double> values);

/// One partitioning step. Appends n_phases probes to the trace.
void partition_iteration(ControlState& state, Feedback& feedback, std::size_t n_phases,
                         std::mt19937_64& rng);

struct OptimizationOptions {
  std::size_t budget = 3000;  ///< total measurements
  std::size_t n_phases = 5;
  /// Stop once the fitted optimum reaches target_enhancement * baseline.
  std::optional<double> target_enhancement;
  double baseline = 0.0;
};

/// Iterate until the next iteration would exceed the budget or the target is met.
void run_optimization(ControlState& state, Feedback& feedback, const OptimizationOptions& opts,
                      std::mt19937_64& rng);

enum class ModeOverlay { pi_step_horizontal, pi_step_vertical };

ModeOverlay parse_mode_overlay(const std::string& s);

/// Add pi to the right half (horizontal) or lower half (vertical) of the segments.
ControlState add_mode_overlay(ControlState state, ModeOverlay mode);

}  // namespace pumpshape
