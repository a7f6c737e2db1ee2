#pragma once

#include <array>
#include <string>
#include <vector>

#include "geoemu/tensor.hpp"

namespace geoemu::plot {

using Color = std::array<uint8_t, 3>;

struct Image {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> rgb;  // 3 * width * height

  Image(int w, int h, Color fill = {255, 255, 255});
  void set(int x, int y, Color c);
  void line(int x0, int y0, int x1, int y1, Color c);
};

void write_ppm(const std::string& path, const Image& img);

// Heatmap of a [L,W] field; NaN cells render grey. Diverging palette when
// the data straddles zero, sequential otherwise.
Image render_heatmap(const Tensor& field, int scale);

struct Series {
  std::string name;
  std::vector<double> xs;
  std::vector<double> ys;
  Color color{0, 0, 0};
};

Image render_lines(const std::vector<Series>& series, int width = 640,
                   int height = 400);

Image render_scatter(const std::vector<double>& xs, const std::vector<double>& ys,
                     int width = 480, int height = 480);

Color palette_color(int i);

}  // namespace geoemu::plot
