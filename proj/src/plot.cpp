#include "geoemu/plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "geoemu/error.hpp"

namespace geoemu::plot {

Image::Image(int w, int h, Color fill) : width(w), height(h) {
  rgb.assign(size_t(3) * w * h, 0);
  for (int64_t i = 0; i < int64_t(w) * h; ++i) {
    rgb[size_t(3 * i)] = fill[0];
    rgb[size_t(3 * i + 1)] = fill[1];
    rgb[size_t(3 * i + 2)] = fill[2];
  }
}

void Image::set(int x, int y, Color c) {
  if (x < 0 || x >= width || y < 0 || y >= height) return;
  size_t i = size_t(3) * (size_t(y) * width + x);
  rgb[i] = c[0];
  rgb[i + 1] = c[1];
  rgb[i + 2] = c[2];
}

void Image::line(int x0, int y0, int x1, int y1, Color c) {
  // Bresenham.
  int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
  int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
  int err = dx + dy;
  while (true) {
    set(x0, y0, c);
    if (x0 == x1 && y0 == y1) break;
    int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
}

void write_ppm(const std::string& path, const Image& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw geoemu::runtime_error("cannot write image \"" + path + "\"");
  out << "P6\n" << img.width << " " << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.rgb.data()),
            std::streamsize(img.rgb.size()));
}

namespace {

Color lerp(Color a, Color b, double t) {
  return {uint8_t(a[0] + (b[0] - a[0]) * t), uint8_t(a[1] + (b[1] - a[1]) * t),
          uint8_t(a[2] + (b[2] - a[2]) * t)};
}

Color diverging(double t) {  // t in [0,1], 0.5 = white
  if (t < 0.5) return lerp({33, 102, 172}, {255, 255, 255}, t * 2);
  return lerp({255, 255, 255}, {178, 24, 43}, (t - 0.5) * 2);
}

Color sequential(double t) { return lerp({255, 255, 204}, {37, 52, 148}, t); }

}  // namespace

Image render_heatmap(const Tensor& field, int scale) {
  if (field.rank() != 2) throw validation_error("render_heatmap: expected [L,W]");
  if (scale < 1) throw validation_error("render_heatmap: scale must be >= 1");
  const int L = field.dim(0), W = field.dim(1);
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (int64_t i = 0; i < field.size(); ++i)
    if (std::isfinite(field[i])) {
      lo = std::min(lo, field[i]);
      hi = std::max(hi, field[i]);
    }
  if (!(lo <= hi)) lo = hi = 0;
  bool diverge = lo < 0 && hi > 0;
  double amp = diverge ? std::max(-lo, hi) : (hi > lo ? hi - lo : 1.0);

  Image img(W * scale, L * scale);
  for (int y = 0; y < L; ++y)
    for (int x = 0; x < W; ++x) {
      double v = field.at2(y, x);
      Color c{180, 180, 180};  // missing
      if (std::isfinite(v))
        c = diverge ? diverging(0.5 + v / (2 * amp))
                    : sequential(amp > 0 ? (v - lo) / amp : 0.5);
      for (int dy = 0; dy < scale; ++dy)
        for (int dx = 0; dx < scale; ++dx)
          img.set(x * scale + dx, (L - 1 - y) * scale + dy, c);
    }
  return img;
}

Color palette_color(int i) {
  static const Color palette[] = {{31, 119, 180}, {255, 127, 14}, {44, 160, 44},
                                  {214, 39, 40},  {148, 103, 189}, {140, 86, 75},
                                  {227, 119, 194}, {127, 127, 127}};
  return palette[size_t(i) % (sizeof(palette) / sizeof(palette[0]))];
}

namespace {

struct Extent {
  double xlo = 0, xhi = 1, ylo = 0, yhi = 1;
};

Extent data_extent(const std::vector<Series>& series) {
  Extent e;
  bool first = true;
  for (const auto& s : series)
    for (size_t i = 0; i < s.xs.size(); ++i) {
      if (!std::isfinite(s.xs[i]) || !std::isfinite(s.ys[i])) continue;
      if (first) {
        e = {s.xs[i], s.xs[i], s.ys[i], s.ys[i]};
        first = false;
      } else {
        e.xlo = std::min(e.xlo, s.xs[i]);
        e.xhi = std::max(e.xhi, s.xs[i]);
        e.ylo = std::min(e.ylo, s.ys[i]);
        e.yhi = std::max(e.yhi, s.ys[i]);
      }
    }
  if (e.xhi <= e.xlo) e.xhi = e.xlo + 1;
  if (e.yhi <= e.ylo) e.yhi = e.ylo + 1;
  return e;
}

}  // namespace

Image render_lines(const std::vector<Series>& series, int width, int height) {
  Image img(width, height);
  const int m = 30;  // margin
  img.line(m, height - m, width - 10, height - m, {0, 0, 0});
  img.line(m, height - m, m, 10, {0, 0, 0});
  Extent e = data_extent(series);
  auto px = [&](double x) {
    return m + int((x - e.xlo) / (e.xhi - e.xlo) * (width - m - 10));
  };
  auto py = [&](double y) {
    return height - m - int((y - e.ylo) / (e.yhi - e.ylo) * (height - m - 10));
  };
  for (const auto& s : series)
    for (size_t i = 1; i < s.xs.size(); ++i)
      img.line(px(s.xs[i - 1]), py(s.ys[i - 1]), px(s.xs[i]), py(s.ys[i]),
               s.color);
  return img;
}

Image render_scatter(const std::vector<double>& xs, const std::vector<double>& ys,
                     int width, int height) {
  if (xs.size() != ys.size())
    throw validation_error("render_scatter: series length mismatch");
  std::vector<Series> s{{"", xs, ys, {0, 0, 0}}};
  Image img(width, height);
  const int m = 30;
  img.line(m, height - m, width - 10, height - m, {0, 0, 0});
  img.line(m, height - m, m, 10, {0, 0, 0});
  Extent e = data_extent(s);
  for (size_t i = 0; i < xs.size(); ++i) {
    if (!std::isfinite(xs[i]) || !std::isfinite(ys[i])) continue;
    int x = m + int((xs[i] - e.xlo) / (e.xhi - e.xlo) * (width - m - 10));
    int y = height - m - int((ys[i] - e.ylo) / (e.yhi - e.ylo) * (height - m - 10));
    img.set(x, y, {31, 119, 180});
    img.set(x + 1, y, {31, 119, 180});
    img.set(x, y + 1, {31, 119, 180});
  }
  // y = x guide over the shared extent.
  double lo = std::max(e.xlo, e.ylo), hi = std::min(e.xhi, e.yhi);
  if (lo < hi) {
    int x0 = m + int((lo - e.xlo) / (e.xhi - e.xlo) * (width - m - 10));
    int x1 = m + int((hi - e.xlo) / (e.xhi - e.xlo) * (width - m - 10));
    int y0 = height - m - int((lo - e.ylo) / (e.yhi - e.ylo) * (height - m - 10));
    int y1 = height - m - int((hi - e.ylo) / (e.yhi - e.ylo) * (height - m - 10));
    img.line(x0, y0, x1, y1, {150, 150, 150});
  }
  return img;
}

}  // namespace geoemu::plot
