#pragma once

// Dataset manifest shared with the feature extractor: a JSON-lines file with
// one {"path", "label", "split"} object per image, plus a JSON class table
// {"classes": [name, ...]} indexed by label.

#include <iosfwd>
#include <string>
#include <vector>

#include "fgpart/featio.hpp"

namespace fgpart {

struct ManifestEntry {
  std::string path;
  int label = 0;
  Split split = Split::Train;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  std::vector<std::string> class_names;

  int class_count() const { return static_cast<int>(class_names.size()); }

  /// Labels inside [0, C) and every class used; with `require_both_splits`,
  /// both train and test must be non-empty. Throws DataError.
  void validate(bool require_both_splits) const;
};

std::vector<ManifestEntry> parse_manifest_lines(std::istream& in);
void write_manifest_lines(std::ostream& out, const std::vector<ManifestEntry>& entries);

std::vector<std::string> parse_class_table(std::istream& in);
void write_class_table(std::ostream& out, const std::vector<std::string>& names);

DatasetManifest load_manifest(const std::string& manifest_path, const std::string& classes_path);

}  // namespace fgpart
