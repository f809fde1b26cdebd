#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pumpshape/grid.hpp"
#include "pumpshape/turbulence.hpp"

namespace pumpshape {

struct TargetMask {
  Grid<std::uint8_t> mask;
  std::string source;  ///< identifier of the reference pattern

  std::size_t size() const noexcept { return mask.size(); }
  std::size_t count() const noexcept;
};

/// Pixels at or above a quarter of the reference maximum.
TargetMask target_mask(const Grid<double>& reference, std::string source = "reference");

double masked_sum(const Grid<double>& pattern, const TargetMask& mask);

/// sum(after over mask) / (mean(before over the whole window) * |mask|)
double enhancement(const Grid<double>& before, const Grid<double>& after, const TargetMask& mask);

/// sum(after over mask) / sum(unscattered over mask)
double efficiency(const Grid<double>& after, const Grid<double>& unscattered,
                  const TargetMask& mask);

/// Single-pixel enhancement of a time trace: mean while optimising over mean
/// once the correction is frozen.
double dynamic_enhancement(std::span<const double> during, std::span<const double> frozen);

double pearson(std::span<const double> a, std::span<const double> b);
double pearson(const Grid<double>& a, const Grid<double>& b);

struct StructurePoint {
  std::size_t lag = 0;       ///< samples
  double separation = 0.0;   ///< m
  double along_rows = 0.0;   ///< horizontal separations
  double along_cols = 0.0;   ///< vertical separations
  double value = 0.0;        ///< mean of both orientations
};

/// Ensemble-averaged <(phi(x + r) - phi(x))^2> for axis-aligned separations.
std::vector<StructurePoint> structure_function(std::span<const PhaseScreen> screens,
                                               std::span<const std::size_t> lags);

/// Accumulator form, for ensembles too large to hold in memory.
class StructureAccumulator {
 public:
  explicit StructureAccumulator(std::vector<std::size_t> lags);
  void add(const PhaseScreen& screen);
  std::size_t screens() const noexcept { return screens_; }
  std::vector<StructurePoint> result() const;

 private:
  std::vector<std::size_t> lags_;
  std::vector<double> rows_, cols_;
  std::vector<double> row_pairs_, col_pairs_;
  std::size_t screens_ = 0;
  double dx_ = 0.0;
};

}  // namespace pumpshape
