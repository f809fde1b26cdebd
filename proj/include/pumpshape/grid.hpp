#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "pumpshape/errors.hpp"

namespace pumpshape {

/// Square row-major grid, `size` samples per side.
template <typename T>
class Grid {
 public:
  Grid() = default;
  explicit Grid(std::size_t size, T fill = T{}) : size_(size), data_(size * size, fill) {}

  std::size_t size() const noexcept { return size_; }
  std::size_t count() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(std::size_t row, std::size_t col) noexcept { return data_[row * size_ + col]; }
  const T& operator()(std::size_t row, std::size_t col) const noexcept {
    return data_[row * size_ + col];
  }
  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }
  std::span<T> row(std::size_t r) noexcept { return {data_.data() + r * size_, size_}; }
  std::span<const T> row(std::size_t r) const noexcept {
    return {data_.data() + r * size_, size_};
  }

  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  std::size_t size_ = 0;
  std::vector<T> data_;
};

constexpr bool is_power_of_two(std::size_t n) noexcept { return n != 0 && (n & (n - 1)) == 0; }

template <typename A, typename B>
void require_congruent(const Grid<A>& a, const Grid<B>& b, const char* what) {
  if (a.size() != b.size()) throw ShapeError(std::string(what) + ": grid sizes differ");
}

}  // namespace pumpshape
