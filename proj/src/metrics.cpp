#include "pumpshape/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pumpshape/kernels.hpp"

namespace pumpshape {

std::size_t TargetMask::count() const noexcept {
  return static_cast<std::size_t>(
      std::count_if(mask.values().begin(), mask.values().end(), [](auto v) { return v != 0; }));
}

TargetMask target_mask(const Grid<double>& reference, std::string source) {
  if (reference.empty()) throw DomainError("target mask needs a non-empty reference");
  const double peak = *std::max_element(reference.values().begin(), reference.values().end());
  if (!(peak > 0.0)) throw DomainError("target mask reference has no positive maximum");
  TargetMask m{Grid<std::uint8_t>(reference.size()), std::move(source)};
  const double threshold = peak / 4.0;
  for (std::size_t i = 0; i < reference.count(); ++i) m.mask[i] = reference[i] >= threshold;
  return m;
}

double masked_sum(const Grid<double>& pattern, const TargetMask& mask) {
  require_congruent(pattern, mask.mask, "masked_sum");
  double s = 0.0;
  for (std::size_t i = 0; i < pattern.count(); ++i) {
    if (mask.mask[i]) s += pattern[i];
  }
  return s;
}

double enhancement(const Grid<double>& before, const Grid<double>& after, const TargetMask& mask) {
  require_congruent(before, after, "enhancement");
  const double mean_before =
      std::accumulate(before.values().begin(), before.values().end(), 0.0) /
      static_cast<double>(before.count());
  const double denom = mean_before * static_cast<double>(mask.count());
  if (!(denom != 0.0)) throw DomainError("enhancement: zero reference signal");
  return masked_sum(after, mask) / denom;
}

double efficiency(const Grid<double>& after, const Grid<double>& unscattered,
                  const TargetMask& mask) {
  const double denom = masked_sum(unscattered, mask);
  if (!(denom != 0.0)) throw DomainError("efficiency: zero unscattered signal");
  return masked_sum(after, mask) / denom;
}

double dynamic_enhancement(std::span<const double> during, std::span<const double> frozen) {
  if (during.empty() || frozen.empty()) throw DomainError("dynamic enhancement needs both phases");
  const double a = std::accumulate(during.begin(), during.end(), 0.0) / static_cast<double>(during.size());
  const double b = std::accumulate(frozen.begin(), frozen.end(), 0.0) / static_cast<double>(frozen.size());
  if (!(b != 0.0)) throw DomainError("dynamic enhancement: zero frozen signal");
  return a / b;
}

double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("pearson: lengths differ");
  if (a.size() < 2) throw DomainError("pearson needs at least two samples");
  const auto n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (!(saa > 0.0) || !(sbb > 0.0)) throw DomainError("pearson: zero variance");
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

double pearson(const Grid<double>& a, const Grid<double>& b) {
  require_congruent(a, b, "pearson");
  return pearson(a.values(), b.values());
}

StructureAccumulator::StructureAccumulator(std::vector<std::size_t> lags)
    : lags_(std::move(lags)),
      rows_(lags_.size()),
      cols_(lags_.size()),
      row_pairs_(lags_.size()),
      col_pairs_(lags_.size()) {}

void StructureAccumulator::add(const PhaseScreen& screen) {
  const auto& k = kernels::active();
  const std::size_t n = screen.size();
  if (screens_ == 0) dx_ = screen.dx;
  for (std::size_t li = 0; li < lags_.size(); ++li) {
    const std::size_t lag = lags_[li];
    if (lag == 0 || lag >= n) throw RangeError("structure-function lag outside the grid");
    double horiz = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      const auto row = screen.phase.row(r);
      horiz += k.sum_sq_diff(row.subspan(lag), row.first(n - lag));
    }
    double vert = 0.0;
    for (std::size_t r = 0; r + lag < n; ++r) {
      vert += k.sum_sq_diff(screen.phase.row(r + lag), screen.phase.row(r));
    }
    rows_[li] += horiz;
    cols_[li] += vert;
    row_pairs_[li] += static_cast<double>(n * (n - lag));
    col_pairs_[li] += static_cast<double>(n * (n - lag));
  }
  ++screens_;
}

std::vector<StructurePoint> StructureAccumulator::result() const {
  std::vector<StructurePoint> out;
  for (std::size_t li = 0; li < lags_.size(); ++li) {
    StructurePoint p;
    p.lag = lags_[li];
    p.separation = static_cast<double>(lags_[li]) * dx_;
    p.along_rows = row_pairs_[li] > 0 ? rows_[li] / row_pairs_[li] : 0.0;
    p.along_cols = col_pairs_[li] > 0 ? cols_[li] / col_pairs_[li] : 0.0;
    p.value = 0.5 * (p.along_rows + p.along_cols);
    out.push_back(p);
  }
  return out;
}

std::vector<StructurePoint> structure_function(std::span<const PhaseScreen> screens,
                                               std::span<const std::size_t> lags) {
  StructureAccumulator acc({lags.begin(), lags.end()});
  for (const auto& s : screens) acc.add(s);
  return acc.result();
}

}  // namespace pumpshape
