#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace fieldbench {

struct GridDims {
  int rows = 0;
  int cols = 0;

  bool operator==(const GridDims&) const = default;
  std::int64_t cell_count() const { return std::int64_t(rows) * cols; }
};

/// Dense row-major 2-D array. The workhorse container for fields, masks,
/// value rasters and per-cell uncertainty maps.
template <typename T>
struct Grid2D {
  int rows = 0;
  int cols = 0;
  std::vector<T> v;

  Grid2D() = default;
  Grid2D(int r, int c, T fill = T{}) : rows(r), cols(c), v(std::size_t(r) * c, fill) {}
  explicit Grid2D(GridDims d, T fill = T{}) : Grid2D(d.rows, d.cols, fill) {}

  T& at(int r, int c) { return v[std::size_t(r) * cols + c]; }
  const T& at(int r, int c) const { return v[std::size_t(r) * cols + c]; }

  GridDims dims() const { return {rows, cols}; }
  std::size_t size() const { return v.size(); }
  bool in_bounds(int r, int c) const { return r >= 0 && r < rows && c >= 0 && c < cols; }

  T* data() { return v.data(); }
  const T* data() const { return v.data(); }

  template <typename U>
  Grid2D<U> cast() const {
    Grid2D<U> out(rows, cols);
    for (std::size_t i = 0; i < v.size(); ++i) out.v[i] = static_cast<U>(v[i]);
    return out;
  }
};

using GridF = Grid2D<float>;
using GridD = Grid2D<double>;

/// RAW2D container: magic "UF2D", u32-LE height, u32-LE width, then
/// height*width float32-LE values in row-major order. Byte layout is pinned;
/// files written on any platform compare equal byte-for-byte.
void write_raw2d(const std::filesystem::path& path, const GridF& grid);
GridF read_raw2d(const std::filesystem::path& path);

struct Raw2dError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace fieldbench
