#include "fgpart/grouping.hpp"

#include <algorithm>
#include <stdexcept>

#include "fgpart/errors.hpp"

namespace fgpart {

ScaleGrouping ScaleGrouping::from_sizes(const std::vector<int>& sizes) {
  if (sizes.empty()) throw std::invalid_argument("scale grouping: no groups");
  ScaleGrouping g;
  for (int j = 0; j < static_cast<int>(sizes.size()); ++j) {
    if (sizes[j] < 1) throw std::invalid_argument("scale grouping: empty group");
    g.first_.push_back(static_cast<int>(g.group_of_scale_.size()) + 1);
    g.group_of_scale_.insert(g.group_of_scale_.end(), sizes[j], j);
  }
  return g;
}

int ScaleGrouping::group_of(int scale) const {
  if (scale < 1 || scale > scales()) throw std::out_of_range("scale " + std::to_string(scale) + " not in grouping");
  return group_of_scale_[scale - 1];
}

std::vector<int> ScaleGrouping::members(int group) const {
  std::vector<int> out;
  for (int s = 1; s <= scales(); ++s)
    if (group_of_scale_[s - 1] == group) out.push_back(s);
  return out;
}

std::vector<int> ScaleGrouping::sizes() const {
  std::vector<int> out(groups(), 0);
  for (int g : group_of_scale_) ++out[g];
  return out;
}

nlohmann::json ScaleGrouping::to_json() const { return nlohmann::json{{"group_sizes", sizes()}}; }

ScaleGrouping ScaleGrouping::from_json(const nlohmann::json& j) {
  try {
    return from_sizes(j.at("group_sizes").get<std::vector<int>>());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("scale grouping: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw DataError(e.what());
  }
}

ScaleGrouping default_grouping(int n) {
  if (n < 1) throw std::invalid_argument("default_grouping: N must be >= 1");
  std::vector<int> sizes;
  const int singles = std::min(4, n);
  sizes.assign(singles, 1);
  int rest = n - singles;
  if (rest % 2 == 1) {
    const int tail = rest >= 3 ? 3 : 1;
    sizes.insert(sizes.end(), (rest - tail) / 2, 2);
    sizes.push_back(tail);
  } else {
    sizes.insert(sizes.end(), rest / 2, 2);
  }
  return ScaleGrouping::from_sizes(sizes);
}

ScaleGrouping single_group(int n) { return ScaleGrouping::from_sizes({n}); }

ScaleGrouping per_scale_grouping(int n) { return ScaleGrouping::from_sizes(std::vector<int>(n, 1)); }

ScaleGrouping grouping_by_name(const std::string& name, int n) {
  if (name == "default") return default_grouping(n);
  if (name == "single") return single_group(n);
  if (name == "per-scale") return per_scale_grouping(n);
  throw UsageError("unknown grouping preset '" + name + "' (default, single, per-scale)");
}

}  // namespace fgpart
