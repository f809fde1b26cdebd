#include <atomic>
#include <cstdlib>
#include <string_view>

#include "pumpshape/kernels.hpp"

namespace pumpshape::kernels {

#if defined(PUMPSHAPE_HAVE_AVX2)
const Table* avx2_table_impl() noexcept;
#endif

const Table* avx2_table() noexcept {
#if defined(PUMPSHAPE_HAVE_AVX2)
  static const bool supported = [] {
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  }();
  return supported ? avx2_table_impl() : nullptr;
#else
  return nullptr;
#endif
}

namespace {

const Table* initial_choice() noexcept {
  if (const char* env = std::getenv("PUMPSHAPE_ISA"); env && std::string_view(env) == "scalar") {
    return &scalar_table();
  }
  if (const Table* t = avx2_table()) return t;
  return &scalar_table();
}

std::atomic<const Table*>& current() noexcept {
  static std::atomic<const Table*> table{initial_choice()};
  return table;
}

}  // namespace

const Table& active() noexcept { return *current().load(std::memory_order_acquire); }

bool select(Isa isa) noexcept {
  const Table* t = isa == Isa::avx2 ? avx2_table() : &scalar_table();
  if (!t) return false;
  current().store(t, std::memory_order_release);
  return true;
}

std::string_view isa_name(Isa isa) noexcept { return isa == Isa::avx2 ? "avx2" : "scalar"; }

}  // namespace pumpshape::kernels
