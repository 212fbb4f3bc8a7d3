#pragma once

#include <string>
#include <vector>

#include "json.hpp"

namespace fgpart {

/// Partition of the scales 1..N into m contiguous, non-empty groups.
/// Groups are 0-based in code and in every file format.
class ScaleGrouping {
 public:
  ScaleGrouping() = default;

  /// `sizes` lists the number of consecutive scales in each group.
  static ScaleGrouping from_sizes(const std::vector<int>& sizes);

  int scales() const { return static_cast<int>(group_of_scale_.size()); }
  int groups() const { return static_cast<int>(first_.size()); }

  /// Group of scale M (1-based). Throws std::out_of_range.
  int group_of(int scale) const;
  std::vector<int> members(int group) const;
  std::vector<int> sizes() const;

  nlohmann::json to_json() const;
  static ScaleGrouping from_json(const nlohmann::json& j);

  friend bool operator==(const ScaleGrouping&, const ScaleGrouping&) = default;

 private:
  std::vector<int> group_of_scale_;
  std::vector<int> first_;
};

/// Singleton groups for scales 1..min(4, N), then pairs; when an odd number of
/// scales remains after the singletons, the last group takes three (or one,
/// when only one is left). N = 13 gives {1},{2},{3},{4},{5,6},{7,8},{9,10},{11,12,13}.
ScaleGrouping default_grouping(int n);

/// Every scale in one group (the encode-all-parts-together ablation).
ScaleGrouping single_group(int n);

/// One group per scale.
ScaleGrouping per_scale_grouping(int n);

/// "default", "single" or "per-scale".
ScaleGrouping grouping_by_name(const std::string& name, int n);

}  // namespace fgpart
