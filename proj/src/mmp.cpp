#include "fgpart/mmp.hpp"

#include <algorithm>
#include <cstring>
#include <stdexcept>
#include <string>

#include "fgpart/kernels.hpp"

namespace fgpart {

std::size_t mmp_count(int grid) {
  std::size_t total = 0;
  for (std::size_t k = 1; k <= static_cast<std::size_t>(std::max(grid, 0)); ++k) total += k * k;
  return total;
}

Box crop_to_image(const Box& crop, const Box& proposal, int input_size) {
  const std::int64_t w = proposal.width();
  const std::int64_t h = proposal.height();
  const std::int64_t s = input_size;
  auto floor_div = [](std::int64_t a, std::int64_t b) { return a >= 0 ? a / b : -((-a + b - 1) / b); };
  auto ceil_div = [&](std::int64_t a, std::int64_t b) { return -floor_div(-a, b); };
  return Box{static_cast<std::int32_t>(proposal.x0 + floor_div(crop.x0 * w, s)),
             static_cast<std::int32_t>(proposal.y0 + floor_div(crop.y0 * h, s)),
             static_cast<std::int32_t>(proposal.x0 + ceil_div(crop.x1 * w, s)),
             static_cast<std::int32_t>(proposal.y0 + ceil_div(crop.y1 * h, s))};
}

PartSet multi_max_pool(const ProposalRecord& fm, const LayerStack& stack) {
  const int n = fm.grid;
  const std::size_t d = static_cast<std::size_t>(fm.channels);
  if (n < 1 || fm.channels < 1 || fm.values.size() != static_cast<std::size_t>(n) * n * d) {
    throw std::invalid_argument("multi_max_pool: malformed feature map");
  }
  if (!stack_supports_grid(stack, n)) {
    throw std::invalid_argument("multi_max_pool: layer stack (input " + std::to_string(stack.input_size) +
                                ", stride product " + std::to_string(total_stride(stack)) +
                                ") cannot produce a " + std::to_string(n) + "x" + std::to_string(n) + " grid");
  }
  const auto& k = simd::kernels();

  PartSet out;
  out.grid = n;
  out.channels = fm.channels;
  const std::size_t total = mmp_count(n);
  out.parts.reserve(total);
  out.descriptors.resize(total * d);

  // level M window (r, c) = max of the four level M-1 windows at
  // (r, c), (r+1, c), (r, c+1), (r+1, c+1); level 1 is the map itself.
  std::vector<float> prev(fm.values.begin(), fm.values.end());
  std::vector<float> cur;
  std::size_t slot = 0;
  for (int m = 1; m <= n; ++m) {
    const int side = n - m + 1;
    if (m > 1) {
      const int prev_side = side + 1;
      cur.resize(static_cast<std::size_t>(side) * side * d);
      for (int r = 0; r < side; ++r) {
        for (int c = 0; c < side; ++c) {
          float* dst = cur.data() + (static_cast<std::size_t>(r) * side + c) * d;
          auto at = [&](int rr, int cc) { return prev.data() + (static_cast<std::size_t>(rr) * prev_side + cc) * d; };
          std::memcpy(dst, at(r, c), d * sizeof(float));
          k.max_inplace(dst, at(r + 1, c), d);
          k.max_inplace(dst, at(r, c + 1), d);
          k.max_inplace(dst, at(r + 1, c + 1), d);
        }
      }
      prev.swap(cur);
    }
    std::memcpy(out.descriptors.data() + slot * d, prev.data(), prev.size() * sizeof(float));
    for (int r = 0; r < side; ++r) {
      for (int c = 0; c < side; ++c) {
        const Box crop = receptive_box(stack, n, m, r, c, /*clip=*/true);
        out.parts.push_back(PartInfo{m, r, c, crop_to_image(crop, fm.box, stack.input_size)});
      }
    }
    slot += static_cast<std::size_t>(side) * side;
  }
  return out;
}

}  // namespace fgpart
