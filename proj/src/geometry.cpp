#include "fgpart/geometry.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "fgpart/errors.hpp"

namespace fgpart {

Box intersect(const Box& a, const Box& b) {
  Box r{std::max(a.x0, b.x0), std::max(a.y0, b.y0), std::min(a.x1, b.x1), std::min(a.y1, b.y1)};
  if (r.x1 < r.x0) r.x1 = r.x0;
  if (r.y1 < r.y0) r.y1 = r.y0;
  return r;
}

double iou(const Box& a, const Box& b) {
  const std::int64_t inter = intersect(a, b).area();
  const std::int64_t uni = a.area() + b.area() - inter;
  return uni > 0 ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

std::ostream& operator<<(std::ostream& os, const Box& b) {
  return os << '(' << b.x0 << ", " << b.y0 << ", " << b.x1 << ", " << b.y1 << ')';
}

void LayerStack::validate() const {
  if (input_size < 1) throw std::invalid_argument("layer stack: input_size must be >= 1");
  for (const auto& l : layers) {
    if (l.kernel < 1 || l.stride < 1) {
      throw std::invalid_argument("layer stack: layer '" + l.name + "' needs kernel >= 1 and stride >= 1");
    }
  }
}

LayerStack vgg_m_stack() {
  LayerStack s;
  s.input_size = 224;
  s.layers = {
      {"conv1", 7, 2}, {"pool1", 3, 2}, {"conv2", 5, 2}, {"pool2", 3, 2},
      {"conv3", 3, 1}, {"conv4", 3, 1}, {"conv5", 3, 1},
  };
  return s;
}

LayerStack synthetic_stack(int grid) {
  if (grid < 1) throw std::invalid_argument("synthetic_stack: grid must be >= 1");
  LayerStack s;
  s.input_size = 16 * grid;
  s.layers = {{"cell", 16, 16}};
  return s;
}

LayerStack preset_stack(std::string_view name) {
  if (name == "vgg-m" || name == "imagenet-vgg-m") return vgg_m_stack();
  if (name.starts_with("synthetic-")) {
    int n = 0;
    const auto digits = name.substr(10);
    const auto [end, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), n);
    if (ec == std::errc() && end == digits.data() + digits.size() && n >= 1 && n <= 4096) return synthetic_stack(n);
  }
  throw std::invalid_argument("unknown layer stack preset '" + std::string(name) + "'");
}

LayerStack parse_stack(std::istream& in) {
  LayerStack stack;
  stack.layers.clear();
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string name;
    if (!(ls >> name)) continue;
    if (name == "input_size") {
      if (!(ls >> stack.input_size)) {
        throw DataError("layer stack line " + std::to_string(lineno) + ": expected input_size <pixels>");
      }
      continue;
    }
    LayerSpec spec{name, 0, 0};
    if (!(ls >> spec.kernel >> spec.stride)) {
      throw DataError("layer stack line " + std::to_string(lineno) + ": expected '<name> <kernel> <stride>'");
    }
    std::string extra;
    if (ls >> extra) throw DataError("layer stack line " + std::to_string(lineno) + ": trailing token '" + extra + "'");
    stack.layers.push_back(std::move(spec));
  }
  try {
    stack.validate();
  } catch (const std::invalid_argument& e) {
    throw DataError(e.what());
  }
  return stack;
}

LayerStack load_stack(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open layer stack file '" + path + "'");
  return parse_stack(in);
}

std::int64_t receptive_extent(const LayerStack& stack, int cells) {
  if (cells < 1) throw std::invalid_argument("receptive_extent: cells must be >= 1");
  stack.validate();
  std::int64_t r = cells;
  for (auto it = stack.layers.rbegin(); it != stack.layers.rend(); ++it) {
    r = std::int64_t{it->stride} * (r - 1) + it->kernel;
  }
  return r;
}

std::int64_t total_stride(const LayerStack& stack) {
  std::int64_t s = 1;
  for (const auto& l : stack.layers) s *= l.stride;
  return s;
}

bool stack_supports_grid(const LayerStack& stack, int grid) {
  return grid >= 1 && (std::int64_t{grid} - 1) * total_stride(stack) < stack.input_size;
}

Box receptive_box(const LayerStack& stack, int grid, int scale, int row, int col, bool clip) {
  if (grid < 1) throw std::invalid_argument("receptive_box: grid must be >= 1");
  if (scale < 1 || scale > grid) throw std::invalid_argument("receptive_box: scale outside [1, grid]");
  const int last = grid - scale;
  if (row < 0 || col < 0 || row > last || col > last) {
    throw std::out_of_range("receptive_box: window origin (" + std::to_string(row) + ", " + std::to_string(col) +
                            ") outside [0, " + std::to_string(last) + "]^2");
  }
  const std::int64_t side = receptive_extent(stack, scale);
  const std::int64_t step = total_stride(stack);
  const std::int64_t x0 = step * col;
  const std::int64_t y0 = step * row;
  constexpr std::int64_t kMax = std::numeric_limits<std::int32_t>::max();
  if (x0 + side > kMax || y0 + side > kMax) throw std::out_of_range("receptive_box: box exceeds 32-bit pixel range");
  Box b{static_cast<std::int32_t>(x0), static_cast<std::int32_t>(y0), static_cast<std::int32_t>(x0 + side),
        static_cast<std::int32_t>(y0 + side)};
  if (clip) b = intersect(b, Box{0, 0, stack.input_size, stack.input_size});
  return b;
}

}  // namespace fgpart
