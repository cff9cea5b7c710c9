#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

namespace evac {

/// Grid coordinate, row-major (row grows downwards).
struct CellPos {
  int row{0};
  int col{0};

  friend constexpr auto operator<=>(const CellPos&, const CellPos&) = default;
};

constexpr int manhattan(CellPos a, CellPos b) {
  const int dr = a.row > b.row ? a.row - b.row : b.row - a.row;
  const int dc = a.col > b.col ? a.col - b.col : b.col - a.col;
  return dr + dc;
}

constexpr bool adjacent(CellPos a, CellPos b) { return manhattan(a, b) == 1; }

enum class Direction : std::uint8_t { Up, Left, Down, Right };

/// Fixed neighbour order; path search tie-breaking depends on it.
inline constexpr std::array<Direction, 4> kDirectionOrder{Direction::Up, Direction::Left,
                                                          Direction::Down, Direction::Right};

constexpr CellPos step(CellPos p, Direction d) {
  switch (d) {
    case Direction::Up: return {p.row - 1, p.col};
    case Direction::Left: return {p.row, p.col - 1};
    case Direction::Down: return {p.row + 1, p.col};
    case Direction::Right: return {p.row, p.col + 1};
  }
  return p;
}

std::optional<Direction> direction_between(CellPos from, CellPos to);
std::string_view to_string(Direction d);

/// Dense set of cells over a fixed rows x cols extent. A default-constructed
/// set has zero extent and contains nothing.
class CellSet {
 public:
  CellSet() = default;
  CellSet(int rows, int cols)
      : rows_(rows), cols_(cols), bits_(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols), 0) {}

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return count_; }
  bool empty() const { return count_ == 0; }

  bool in_extent(CellPos p) const { return p.row >= 0 && p.col >= 0 && p.row < rows_ && p.col < cols_; }

  bool contains(CellPos p) const { return in_extent(p) && bits_[index(p)] != 0; }

  /// Returns true when the cell was newly inserted.
  bool insert(CellPos p) {
    if (!in_extent(p)) return false;
    auto& b = bits_[index(p)];
    if (b != 0) return false;
    b = 1;
    ++count_;
    return true;
  }

  void erase(CellPos p) {
    if (!in_extent(p)) return;
    auto& b = bits_[index(p)];
    if (b == 0) return;
    b = 0;
    --count_;
  }

  /// Members in row-major order.
  std::vector<CellPos> cells() const;

  bool is_subset_of(const CellSet& other) const;

  friend bool operator==(const CellSet& a, const CellSet& b) {
    if (a.count_ != b.count_) return false;
    if (a.count_ == 0) return true;
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.bits_ == b.bits_;
  }

 private:
  std::size_t index(CellPos p) const {
    return static_cast<std::size_t>(p.row) * static_cast<std::size_t>(cols_) + static_cast<std::size_t>(p.col);
  }

  int rows_{0};
  int cols_{0};
  std::size_t count_{0};
  std::vector<std::uint8_t> bits_;
};

}  // namespace evac
