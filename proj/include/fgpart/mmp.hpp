#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fgpart/featio.hpp"
#include "fgpart/geometry.hpp"

namespace fgpart {

/// Where a pooled window sits: scale M, window origin, box in image pixels.
struct PartInfo {
  int scale = 1;
  int row = 0;
  int col = 0;
  Box box;

  friend bool operator==(const PartInfo&, const PartInfo&) = default;
};

/// All part proposals of one object proposal, ordered by (scale, row, col).
/// Descriptors are stored contiguously, `channels` floats per part.
struct PartSet {
  int grid = 0;
  int channels = 0;
  std::vector<PartInfo> parts;
  std::vector<float> descriptors;

  std::size_t size() const { return parts.size(); }
  std::span<const float> descriptor(std::size_t i) const {
    return {descriptors.data() + i * static_cast<std::size_t>(channels), static_cast<std::size_t>(channels)};
  }
};

/// Sum over M = 1..N of (N - M + 1)^2.
std::size_t mmp_count(int grid);

/// Affinely maps a box in crop coordinates ([0, input_size)^2) into the
/// object proposal's box in the source image. Rounds outward.
Box crop_to_image(const Box& crop_box, const Box& proposal_box, int input_size);

/// Multi-max pooling: every M x M window of the map, for M = 1..N, pooled
/// channelwise with max. Boxes are clipped receptive fields mapped into the
/// source image. Throws std::invalid_argument if the stack cannot produce a
/// map of this grid size.
PartSet multi_max_pool(const ProposalRecord& fm, const LayerStack& stack);

}  // namespace fgpart
