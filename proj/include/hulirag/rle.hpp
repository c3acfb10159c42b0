#pragma once

#include <cstdint>
#include <vector>

namespace hulirag {

/// Row-major binary grid; cells hold 0 or 1.
struct BinaryGrid {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::vector<std::uint8_t> cells;

  std::size_t size() const { return static_cast<std::size_t>(width) * height; }
  std::uint8_t at(std::uint32_t x, std::uint32_t y) const {
    return cells[static_cast<std::size_t>(y) * width + x];
  }

  friend bool operator==(const BinaryGrid&, const BinaryGrid&) = default;
};

/// Run-length encoded binary mask. Runs alternate 0s and 1s over the
/// row-major scan, starting with a (possibly empty) run of 0s.
struct RleMask {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::vector<std::uint32_t> runs;

  std::size_t area() const { return static_cast<std::size_t>(width) * height; }

  friend bool operator==(const RleMask&, const RleMask&) = default;
};

/// Throws Error(kMaskMismatch) unless the runs sum to width*height, both
/// dims are positive, and no run after the first is empty.
void validate(const RleMask& mask);

RleMask rle_encode(const BinaryGrid& grid);
BinaryGrid rle_decode(const RleMask& mask);

/// Number of 1-cells, computed from the runs directly.
std::size_t foreground_count(const RleMask& mask);

}  // namespace hulirag
