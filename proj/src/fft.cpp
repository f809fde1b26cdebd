#include "pumpshape/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <utility>

namespace pumpshape::fft {
namespace {

// FFTW's planner is not re-entrant; execution of a finished plan is. Plans are
// made with FFTW_ESTIMATE so the chosen algorithm (and hence the rounding) does
// not depend on timing measurements.
class PlanCache {
 public:
  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

  fftw_plan get(std::size_t n, int sign) {
    std::lock_guard lock(mutex_);
    const auto key = std::make_pair(n, sign);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
    auto* buf = fftw_alloc_complex(n * n);
    fftw_plan plan = fftw_plan_dft_2d(static_cast<int>(n), static_cast<int>(n), buf, buf, sign,
                                      FFTW_ESTIMATE | FFTW_UNALIGNED);
    fftw_free(buf);
    plans_.emplace(key, plan);
    return plan;
  }

 private:
  std::mutex mutex_;
  std::map<std::pair<std::size_t, int>, fftw_plan> plans_;
};

PlanCache& cache() {
  static PlanCache c;
  return c;
}

void run(Grid<cplx>& g, int sign) {
  if (g.empty()) return;
  auto* p = reinterpret_cast<fftw_complex*>(g.data());
  fftw_execute_dft(cache().get(g.size(), sign), p, p);
}

void shift(Grid<cplx>& g, std::size_t by) {
  const std::size_t n = g.size();
  Grid<cplx> out(n);
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t rr = (r + by) % n;
    for (std::size_t c = 0; c < n; ++c) out(rr, (c + by) % n) = g(r, c);
  }
  g = std::move(out);
}

}  // namespace

void forward(Grid<cplx>& g) { run(g, FFTW_FORWARD); }
void inverse(Grid<cplx>& g) { run(g, FFTW_BACKWARD); }

void ifftshift(Grid<cplx>& g) { shift(g, g.size() - g.size() / 2); }
void fftshift(Grid<cplx>& g) { shift(g, g.size() / 2); }

void centered_forward(Grid<cplx>& g) {
  ifftshift(g);
  forward(g);
  fftshift(g);
}

}  // namespace pumpshape::fft
