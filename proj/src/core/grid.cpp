#include "fieldbench/core/grid.hpp"

#include <cstring>
#include <fstream>

namespace fieldbench {

namespace {

constexpr char kMagic[4] = {'U', 'F', '2', 'D'};

void put_u32_le(std::vector<char>& buf, std::uint32_t x) {
  buf.push_back(char(x & 0xff));
  buf.push_back(char((x >> 8) & 0xff));
  buf.push_back(char((x >> 16) & 0xff));
  buf.push_back(char((x >> 24) & 0xff));
}

std::uint32_t get_u32_le(const unsigned char* p) {
  return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
         (std::uint32_t(p[3]) << 24);
}

}  // namespace

void write_raw2d(const std::filesystem::path& path, const GridF& grid) {
  std::vector<char> buf;
  buf.reserve(12 + grid.size() * 4);
  buf.insert(buf.end(), kMagic, kMagic + 4);
  put_u32_le(buf, std::uint32_t(grid.rows));
  put_u32_le(buf, std::uint32_t(grid.cols));
  for (float f : grid.v) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_u32_le(buf, bits);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Raw2dError("cannot open for writing: " + path.string());
  out.write(buf.data(), std::streamsize(buf.size()));
  if (!out) throw Raw2dError("short write: " + path.string());
}

GridF read_raw2d(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Raw2dError("cannot open: " + path.string());
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)),
                                 std::istreambuf_iterator<char>());
  if (buf.size() < 12 || std::memcmp(buf.data(), kMagic, 4) != 0)
    throw Raw2dError("not a RAW2D file: " + path.string());
  const std::uint32_t rows = get_u32_le(buf.data() + 4);
  const std::uint32_t cols = get_u32_le(buf.data() + 8);
  const std::size_t expected = 12 + std::size_t(rows) * cols * 4;
  if (buf.size() != expected)
    throw Raw2dError("truncated RAW2D file: " + path.string());
  GridF grid{int(rows), int(cols)};
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const std::uint32_t bits = get_u32_le(buf.data() + 12 + i * 4);
    std::memcpy(&grid.v[i], &bits, 4);
  }
  return grid;
}

}  // namespace fieldbench
