#include "evac/geometry.hpp"

namespace evac {

std::optional<Direction> direction_between(CellPos from, CellPos to) {
  for (Direction d : kDirectionOrder) {
    if (step(from, d) == to) return d;
  }
  return std::nullopt;
}

std::string_view to_string(Direction d) {
  switch (d) {
    case Direction::Up: return "up";
    case Direction::Left: return "left";
    case Direction::Down: return "down";
    case Direction::Right: return "right";
  }
  return "?";
}

std::vector<CellPos> CellSet::cells() const {
  std::vector<CellPos> out;
  out.reserve(count_);
  if (count_ == 0) return out;
  for (int r = 0; r < rows_; ++r) {
    for (int c = 0; c < cols_; ++c) {
      if (bits_[index({r, c})] != 0) out.push_back({r, c});
    }
  }
  return out;
}

bool CellSet::is_subset_of(const CellSet& other) const {
  if (count_ == 0) return true;
  if (count_ > other.count_) return false;
  for (int r = 0; r < rows_; ++r) {
    for (int c = 0; c < cols_; ++c) {
      if (bits_[index({r, c})] != 0 && !other.contains({r, c})) return false;
    }
  }
  return true;
}

}  // namespace evac
