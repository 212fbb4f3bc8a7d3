#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace fgpart {

/// Axis-aligned pixel box, half-open: [x0, x1) x [y0, y1).
struct Box {
  std::int32_t x0 = 0;
  std::int32_t y0 = 0;
  std::int32_t x1 = 0;
  std::int32_t y1 = 0;

  std::int64_t width() const { return x1 > x0 ? std::int64_t{x1} - x0 : 0; }
  std::int64_t height() const { return y1 > y0 ? std::int64_t{y1} - y0 : 0; }
  std::int64_t area() const { return width() * height(); }
  bool empty() const { return area() == 0; }

  friend bool operator==(const Box&, const Box&) = default;
};

Box intersect(const Box& a, const Box& b);
double iou(const Box& a, const Box& b);
std::ostream& operator<<(std::ostream& os, const Box& b);

/// One convolution or pooling layer: an a x a window moved with step s.
struct LayerSpec {
  std::string name;
  int kernel = 1;
  int stride = 1;
};

/// Layers ordered from the network input toward the target layer.
struct LayerStack {
  std::vector<LayerSpec> layers;
  int input_size = 224;

  void validate() const;
};

/// conv1..conv5 of imagenet-vgg-m on a 224 x 224 input.
LayerStack vgg_m_stack();

/// One 16 x 16 / stride 16 layer on a (16 grid)^2 input: cell (r, c) sees
/// exactly pixels [16c, 16c + 16) x [16r, 16r + 16). Used by synthetic data.
LayerStack synthetic_stack(int grid);

/// Looks up a built-in stack by name: "vgg-m", or "synthetic-<grid>".
/// Throws std::invalid_argument.
LayerStack preset_stack(std::string_view name);

/// Parses the declarative stack format: one "name kernel stride" per line,
/// an optional "input_size <pixels>" line, '#' starts a comment.
LayerStack parse_stack(std::istream& in);
LayerStack load_stack(const std::string& path);

/// Side length, in input pixels, covered by a T x T block of cells at the
/// last layer of `stack` (r <- s(r-1)+a applied back to the input). Not clipped.
std::int64_t receptive_extent(const LayerStack& stack, int cells);

/// Product of all strides: input-pixel offset between adjacent cells.
std::int64_t total_stride(const LayerStack& stack);

/// Image-space box of the M x M window at (row, col) on a grid x grid map.
/// With `clip` the box is intersected with [0, input_size)^2.
Box receptive_box(const LayerStack& stack, int grid, int scale, int row, int col, bool clip);

/// True when every cell origin of a grid x grid map lies inside the input.
bool stack_supports_grid(const LayerStack& stack, int grid);

}  // namespace fgpart
