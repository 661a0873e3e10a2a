#include "fieldbench/bench/plot.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <vector>

namespace fieldbench::bench {

namespace {

constexpr int kSize = 560;
constexpr int kMargin = 48;
constexpr int kPlot = kSize - 2 * kMargin;

struct Canvas {
  std::vector<unsigned char> rgb;
  Canvas() : rgb(std::size_t(kSize) * kSize * 3, 255) {}

  void set(int x, int y, unsigned char r, unsigned char g, unsigned char b) {
    if (x < 0 || x >= kSize || y < 0 || y >= kSize) return;
    auto* p = rgb.data() + (std::size_t(y) * kSize + x) * 3;
    p[0] = r;
    p[1] = g;
    p[2] = b;
  }

  void line(double x0, double y0, double x1, double y1, unsigned char r, unsigned char g,
            unsigned char b) {
    const int steps = int(std::max(std::fabs(x1 - x0), std::fabs(y1 - y0))) + 1;
    for (int i = 0; i <= steps; ++i) {
      const double t = double(i) / steps;
      set(int(std::lround(x0 + t * (x1 - x0))), int(std::lround(y0 + t * (y1 - y0))), r, g, b);
    }
  }

  void dot(int x, int y, int radius, unsigned char r, unsigned char g, unsigned char b) {
    for (int dy = -radius; dy <= radius; ++dy)
      for (int dx = -radius; dx <= radius; ++dx)
        if (dx * dx + dy * dy <= radius * radius) set(x + dx, y + dy, r, g, b);
  }
};

// data coords in [0,1] -> pixel coords (y axis up)
double px(double v) { return kMargin + v * kPlot; }
double py(double v) { return kSize - kMargin - v * kPlot; }

void save_png(const std::filesystem::path& path, const Canvas& canvas) {
  FILE* fp = std::fopen(path.string().c_str(), "wb");
  if (!fp) throw std::runtime_error("cannot open for writing: " + path.string());

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
    std::fclose(fp);
    throw std::runtime_error("libpng failure while writing " + path.string());
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, kSize, kSize, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_bytep> rows(kSize);
  for (int y = 0; y < kSize; ++y)
    rows[std::size_t(y)] =
        const_cast<unsigned char*>(canvas.rgb.data()) + std::size_t(y) * kSize * 3;
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

}  // namespace

void write_calibration_png(const std::filesystem::path& path,
                           const metrics::CalibrationCurve& curve) {
  Canvas canvas;

  // frame and gridlines at 0.25 steps
  for (int i = 0; i <= 4; ++i) {
    const double v = i / 4.0;
    canvas.line(px(v), py(0), px(v), py(1), 225, 225, 225);
    canvas.line(px(0), py(v), px(1), py(v), 225, 225, 225);
  }
  canvas.line(px(0), py(0), px(1), py(0), 40, 40, 40);
  canvas.line(px(0), py(0), px(0), py(1), 40, 40, 40);
  canvas.line(px(0), py(1), px(1), py(1), 40, 40, 40);
  canvas.line(px(1), py(0), px(1), py(1), 40, 40, 40);

  // perfect calibration diagonal
  canvas.line(px(0), py(0), px(1), py(1), 150, 150, 150);

  // curve through nonempty bins
  double prev_x = 0.0, prev_y = 0.0;
  bool has_prev = false;
  for (std::size_t b = 0; b < curve.bin_counts.size(); ++b) {
    if (curve.bin_counts[b] == 0) continue;
    const double x = std::clamp(curve.mean_pred_unc[b], 0.0, 1.0);
    const double y = std::clamp(curve.mean_emp_err[b], 0.0, 1.0);
    if (has_prev) canvas.line(px(prev_x), py(prev_y), px(x), py(y), 31, 92, 173);
    canvas.dot(int(std::lround(px(x))), int(std::lround(py(y))), 4, 31, 92, 173);
    prev_x = x;
    prev_y = y;
    has_prev = true;
  }

  save_png(path, canvas);
}

}  // namespace fieldbench::bench
