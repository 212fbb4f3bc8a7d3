#pragma once

// PFVM: versioned model container. A JSON metadata block followed by named
// float32 little-endian arrays (same value encoding as PFV1). Layout in
// docs/FORMATS.md.

#include <cstdint>
#include <functional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

namespace fgpart {

inline constexpr char kModelMagic[4] = {'P', 'F', 'V', 'M'};
inline constexpr std::uint8_t kModelVersion = 1;

struct ModelArray {
  std::vector<std::size_t> shape;
  std::vector<float> data;
};

struct ModelFile {
  std::string kind;
  nlohmann::json meta = nlohmann::json::object();
  std::vector<std::pair<std::string, ModelArray>> arrays;

  void add(std::string name, std::vector<std::size_t> shape, std::vector<float> data);
  void add(std::string name, std::vector<std::size_t> shape, std::span<const double> data);

  bool has(std::string_view name) const;
  /// Throws DataError when absent or when the element count differs from `expect` (if non-zero).
  const ModelArray& array(std::string_view name, std::size_t expect = 0) const;
  std::vector<double> doubles(std::string_view name, std::size_t expect = 0) const;
};

void write_model_file(const std::string& path, const ModelFile& model);

/// Throws FormatError on bad magic/version/truncation and DataError when the
/// stored kind differs from `expect_kind` (unless empty).
ModelFile read_model_file(const std::string& path, std::string_view expect_kind = {});

/// Writes through a temporary sibling file and renames it into place, so
/// readers never observe a partially written output.
void write_file_atomic(const std::string& path, const std::function<void(std::ostream&)>& body);
void write_text_atomic(const std::string& path, const std::string& text);

}  // namespace fgpart
