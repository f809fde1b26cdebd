#include "pumpshape/detection.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace pumpshape {

double ScanGeometry::x(std::size_t col) const noexcept {
  return center_x + (static_cast<double>(col) - static_cast<double>(points / 2)) * step;
}
double ScanGeometry::y(std::size_t row) const noexcept {
  return center_y + (static_cast<double>(row) - static_cast<double>(points / 2)) * step;
}

void DetectionConfig::validate() const {
  if (scan.points == 0 || !(scan.step > 0.0)) throw DomainError("scan grid must be non-empty");
  if (!(collection_diameter > 0.0)) throw DomainError("collection diameter must be positive");
  if (!(exposure_per_point >= 0.0) || !(camera_exposure >= 0.0)) {
    throw DomainError("exposures must be non-negative");
  }
  if (!(accidental_rate >= 0.0)) throw DomainError("accidental rate must be non-negative");
  if (!(camera_pixel > 0.0) || camera_pixels == 0) throw DomainError("camera must be non-empty");
  if (!(camera_gain > 0.0)) throw DomainError("camera gain must be positive");
  if (!(coincidence_window > 0.0)) throw DomainError("coincidence window must be positive");
}

double CountMap::x(std::size_t col) const noexcept {
  return center_x + (static_cast<double>(col) - static_cast<double>(size() / 2)) * step;
}
double CountMap::y(std::size_t row) const noexcept {
  return center_y + (static_cast<double>(row) - static_cast<double>(size() / 2)) * step;
}

Grid<double> CountMap::rates() const {
  if (!(exposure > 0.0)) throw DomainError("count map has zero exposure");
  Grid<double> r = counts;
  for (auto& v : r.values()) v /= exposure;
  return r;
}

Observation::Observation(std::size_t side, std::size_t pattern_size,
                         std::vector<std::vector<Term>> rows)
    : side_(side), pattern_size_(pattern_size), rows_(std::move(rows)) {
  if (rows_.size() != side_ * side_) throw ShapeError("observation rows do not match side");
}

Grid<double> Observation::apply(const Grid<double>& pattern) const {
  if (pattern.size() != pattern_size_) throw ShapeError("observation applied to a different grid");
  Grid<double> out(side_);
  for (std::size_t p = 0; p < rows_.size(); ++p) {
    double s = 0.0;
    for (const auto& [q, w] : rows_[p]) s += w * pattern[q];
    out[p] = s;
  }
  return out;
}

std::vector<Observation::Term> Observation::collapse(const Grid<std::uint8_t>& mask) const {
  if (mask.size() != side_) throw ShapeError("mask does not match observation grid");
  std::vector<Term> all;
  for (std::size_t p = 0; p < rows_.size(); ++p) {
    if (mask[p]) all.insert(all.end(), rows_[p].begin(), rows_[p].end());
  }
  std::sort(all.begin(), all.end(), [](const Term& a, const Term& b) { return a.first < b.first; });
  std::vector<Term> merged;
  for (const auto& t : all) {
    if (!merged.empty() && merged.back().first == t.first) {
      merged.back().second += t.second;
    } else {
      merged.push_back(t);
    }
  }
  return merged;
}

namespace {

// Accumulates bilinear interpolation weights for points inside one detector
// element, then merges duplicates.
class TermBuilder {
 public:
  explicit TermBuilder(const FarFieldMap& p) : pattern_(p), n_(p.size()) {}

  void add_point(double x, double y, double weight) {
    const double row = pattern_.row_of(y);
    const double col = pattern_.col_of(x);
    const auto last = static_cast<double>(n_ - 1);
    if (!(row >= 0.0) || !(col >= 0.0) || row > last || col > last) return;
    const auto r0 = static_cast<std::size_t>(row);
    const auto c0 = static_cast<std::size_t>(col);
    const std::size_t r1 = std::min(r0 + 1, n_ - 1);
    const std::size_t c1 = std::min(c0 + 1, n_ - 1);
    const double fr = row - static_cast<double>(r0);
    const double fc = col - static_cast<double>(c0);
    push(r0, c0, weight * (1.0 - fr) * (1.0 - fc));
    push(r0, c1, weight * (1.0 - fr) * fc);
    push(r1, c0, weight * fr * (1.0 - fc));
    push(r1, c1, weight * fr * fc);
  }

  std::vector<Observation::Term> take() {
    std::sort(terms_.begin(), terms_.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<Observation::Term> merged;
    for (const auto& t : terms_) {
      if (!merged.empty() && merged.back().first == t.first) {
        merged.back().second += t.second;
      } else {
        merged.push_back(t);
      }
    }
    terms_.clear();
    return merged;
  }

 private:
  void push(std::size_t r, std::size_t c, double w) {
    if (w != 0.0) terms_.emplace_back(static_cast<std::uint32_t>(r * n_ + c), w);
  }

  const FarFieldMap& pattern_;
  std::size_t n_;
  std::vector<Observation::Term> terms_;
};

}  // namespace

Observation scan_observation(const FarFieldMap& pattern, const ScanGeometry& scan,
                             double diameter) {
  const double radius = 0.5 * diameter;
  const double lo_x = pattern.x(0), hi_x = pattern.x(pattern.size() - 1);
  const double lo_y = pattern.y(0), hi_y = pattern.y(pattern.size() - 1);
  if (scan.x(0) - radius < lo_x || scan.x(scan.points - 1) + radius > hi_x ||
      scan.y(0) - radius < lo_y || scan.y(scan.points - 1) + radius > hi_y) {
    throw RangeError("scan region extends outside the computed pattern");
  }

  const double h = pattern.pitch / 8.0;
  const auto reach = static_cast<long>(std::floor(radius / h));
  const double cell = h * h / (pattern.pitch * pattern.pitch);
  std::vector<std::pair<double, double>> offsets;
  for (long i = -reach; i <= reach; ++i) {
    for (long j = -reach; j <= reach; ++j) {
      const double ox = static_cast<double>(j) * h;
      const double oy = static_cast<double>(i) * h;
      if (ox * ox + oy * oy <= radius * radius) offsets.emplace_back(ox, oy);
    }
  }

  TermBuilder builder(pattern);
  std::vector<std::vector<Observation::Term>> rows(scan.points * scan.points);
  for (std::size_t r = 0; r < scan.points; ++r) {
    for (std::size_t c = 0; c < scan.points; ++c) {
      const double x = scan.x(c), y = scan.y(r);
      for (const auto& [ox, oy] : offsets) builder.add_point(x + ox, y + oy, cell);
      rows[r * scan.points + c] = builder.take();
    }
  }
  return Observation(scan.points, pattern.size(), std::move(rows));
}

Observation camera_observation(const FarFieldMap& pattern, double pixel, std::size_t pixels) {
  const auto sub = static_cast<std::size_t>(std::max(2.0, std::ceil(2.0 * pixel / pattern.pitch)));
  const double h = pixel / static_cast<double>(sub);
  const double cell = h * h / (pattern.pitch * pattern.pitch);
  const auto half = static_cast<double>(pixels / 2);

  TermBuilder builder(pattern);
  std::vector<std::vector<Observation::Term>> rows(pixels * pixels);
  for (std::size_t r = 0; r < pixels; ++r) {
    const double yc = pattern.center_y + (static_cast<double>(r) - half) * pixel;
    for (std::size_t c = 0; c < pixels; ++c) {
      const double xc = pattern.center_x + (static_cast<double>(c) - half) * pixel;
      for (std::size_t i = 0; i < sub; ++i) {
        const double y = yc + (static_cast<double>(i) + 0.5) * h - 0.5 * pixel;
        for (std::size_t j = 0; j < sub; ++j) {
          builder.add_point(xc + (static_cast<double>(j) + 0.5) * h - 0.5 * pixel, y, cell);
        }
      }
      rows[r * pixels + c] = builder.take();
    }
  }
  return Observation(pixels, pattern.size(), std::move(rows));
}

FarFieldMap scaled(FarFieldMap map, double factor) {
  for (auto& v : map.intensity.values()) v *= factor;
  return map;
}

Grid<double> expected_scan_rates(const FarFieldMap& pattern, const DetectionConfig& cfg) {
  return scan_observation(pattern, cfg.scan, cfg.collection_diameter).apply(pattern.intensity);
}

double rate_scale(const FarFieldMap& reference, const DetectionConfig& cfg, double peak_rate) {
  const Grid<double> r = expected_scan_rates(reference, cfg);
  const double peak = *std::max_element(r.values().begin(), r.values().end());
  if (!(peak > 0.0)) throw DomainError("reference pattern is dark over the scan region");
  return peak_rate / peak;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

namespace {

double poisson_draw(std::uint64_t seed, double mean) {
  if (!(mean > 0.0)) return 0.0;
  std::mt19937_64 rng(seed);
  std::poisson_distribution<long long> dist(mean);
  return static_cast<double>(dist(rng));
}

}  // namespace

CountMap scan_coincidences(const FarFieldMap& pattern, const DetectionConfig& cfg) {
  return scan_coincidences(pattern, cfg,
                           scan_observation(pattern, cfg.scan, cfg.collection_diameter));
}

CountMap scan_coincidences(const FarFieldMap& pattern, const DetectionConfig& cfg,
                           const Observation& scan) {
  cfg.validate();
  if (scan.side() != cfg.scan.points) throw ShapeError("scan operator does not match the scan grid");
  const Grid<double> rate = scan.apply(pattern.intensity);
  CountMap out;
  out.counts = Grid<double>(cfg.scan.points);
  out.step = cfg.scan.step;
  out.center_x = cfg.scan.center_x;
  out.center_y = cfg.scan.center_y;
  out.exposure = cfg.exposure_per_point;
  out.seed = cfg.seed;
  for (std::size_t i = 0; i < rate.count(); ++i) {
    const double mean = (rate[i] + cfg.accidental_rate) * cfg.exposure_per_point;
    out.counts[i] = poisson_draw(derive_seed(cfg.seed, i), mean);
  }
  return out;
}

CountMap subtract_accidentals(CountMap map, const DetectionConfig& cfg) {
  if (map.accidental_corrected) throw StateError("accidentals already subtracted");
  const double bg = cfg.accidental_rate * map.exposure;
  for (auto& v : map.counts.values()) v -= bg;
  map.accidental_corrected = true;
  map.accidental_rate = cfg.accidental_rate;
  return map;
}

CountMap camera_capture(const FarFieldMap& pattern, const DetectionConfig& cfg) {
  return camera_capture(pattern, cfg,
                        camera_observation(pattern, cfg.camera_pixel, cfg.camera_pixels));
}

CountMap camera_capture(const FarFieldMap& pattern, const DetectionConfig& cfg,
                        const Observation& obs) {
  cfg.validate();
  if (obs.side() != cfg.camera_pixels) throw ShapeError("camera operator does not match the sensor");
  const Grid<double> binned = obs.apply(pattern.intensity);
  CountMap out;
  out.counts = Grid<double>(cfg.camera_pixels);
  out.step = cfg.camera_pixel;
  out.center_x = pattern.center_x;
  out.center_y = pattern.center_y;
  out.exposure = cfg.camera_exposure;
  out.seed = cfg.seed;
  const double scale = cfg.camera_gain * cfg.camera_exposure;
  for (std::size_t i = 0; i < binned.count(); ++i) {
    const double mean = binned[i] * scale;
    out.counts[i] = cfg.camera_shot_noise ? poisson_draw(derive_seed(cfg.seed, i), mean) : mean;
  }
  return out;
}

}  // namespace pumpshape
