#pragma once

#include <cassert>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace geoxplain {

// Row-major 2D array. Pixel (r, c) lives at index r * cols + c.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int rows, int cols, T fill = T{})
      : rows_(rows), cols_(cols), cells_(static_cast<std::size_t>(rows) * cols, fill) {
    assert(rows >= 0 && cols >= 0);
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return cells_.size(); }
  bool empty() const { return cells_.empty(); }

  T& at(int r, int c) { return cells_[static_cast<std::size_t>(r) * cols_ + c]; }
  const T& at(int r, int c) const { return cells_[static_cast<std::size_t>(r) * cols_ + c]; }

  T& operator[](std::size_t i) { return cells_[i]; }
  const T& operator[](std::size_t i) const { return cells_[i]; }

  T* data() { return cells_.data(); }
  const T* data() const { return cells_.data(); }

  template <typename U>
  bool same_shape(const Grid<U>& other) const {
    return rows_ == other.rows() && cols_ == other.cols();
  }

  bool operator==(const Grid& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_ && cells_ == other.cells_;
  }

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<T> cells_;
};

// Boolean pixel grid; nonzero means set.
using BitGrid = Grid<std::uint8_t>;

inline std::int64_t popcount(const BitGrid& bits) {
  std::int64_t n = 0;
  for (std::size_t i = 0; i < bits.size(); ++i) n += bits[i] ? 1 : 0;
  return n;
}

}  // namespace geoxplain
