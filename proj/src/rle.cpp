#include "hulirag/rle.hpp"

#include <numeric>
#include <string>

#include "hulirag/error.hpp"

namespace hulirag {

void validate(const RleMask& mask) {
  if (mask.width == 0 || mask.height == 0) {
    throw Error(ErrorCode::kMaskMismatch, "mask dimensions must be positive");
  }
  if (mask.runs.empty()) {
    throw Error(ErrorCode::kMaskMismatch, "mask has no runs");
  }
  std::uint64_t sum = 0;
  for (std::size_t i = 0; i < mask.runs.size(); ++i) {
    if (i > 0 && mask.runs[i] == 0) {
      throw Error(ErrorCode::kMaskMismatch, "zero-length run at index " + std::to_string(i));
    }
    sum += mask.runs[i];
  }
  if (sum != mask.area()) {
    throw Error(ErrorCode::kMaskMismatch, "run sum " + std::to_string(sum) + " != " +
                                              std::to_string(mask.width) + "x" +
                                              std::to_string(mask.height));
  }
}

RleMask rle_encode(const BinaryGrid& grid) {
  if (grid.width == 0 || grid.height == 0 || grid.cells.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "cannot encode an empty grid");
  }
  if (grid.cells.size() != grid.size()) {
    throw Error(ErrorCode::kInvalidArgument, "grid is not rectangular");
  }
  RleMask out{grid.width, grid.height, {}};
  std::uint8_t current = 0;
  std::uint32_t run = 0;
  for (std::uint8_t c : grid.cells) {
    const std::uint8_t bit = c ? 1 : 0;
    if (bit != current) {
      out.runs.push_back(run);
      current = bit;
      run = 0;
    }
    ++run;
  }
  out.runs.push_back(run);
  return out;
}

BinaryGrid rle_decode(const RleMask& mask) {
  validate(mask);
  BinaryGrid grid{mask.width, mask.height, {}};
  grid.cells.reserve(mask.area());
  std::uint8_t bit = 0;
  for (std::uint32_t run : mask.runs) {
    grid.cells.insert(grid.cells.end(), run, bit);
    bit ^= 1;
  }
  return grid;
}

std::size_t foreground_count(const RleMask& mask) {
  std::size_t n = 0;
  for (std::size_t i = 1; i < mask.runs.size(); i += 2) {
    n += mask.runs[i];
  }
  return n;
}

}  // namespace hulirag
