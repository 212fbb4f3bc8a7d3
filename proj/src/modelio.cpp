#include "fgpart/modelio.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>

#include "fgpart/byteio.hpp"
#include "fgpart/errors.hpp"

namespace fgpart {

using nlohmann::json;

void ModelFile::add(std::string name, std::vector<std::size_t> shape, std::vector<float> data) {
  std::size_t n = 1;
  for (auto s : shape) n *= s;
  if (n != data.size()) throw std::invalid_argument("model array '" + name + "': shape does not match data");
  arrays.emplace_back(std::move(name), ModelArray{std::move(shape), std::move(data)});
}

void ModelFile::add(std::string name, std::vector<std::size_t> shape, std::span<const double> data) {
  add(std::move(name), std::move(shape), std::vector<float>(data.begin(), data.end()));
}

bool ModelFile::has(std::string_view name) const {
  for (const auto& [n, a] : arrays)
    if (n == name) return true;
  return false;
}

const ModelArray& ModelFile::array(std::string_view name, std::size_t expect) const {
  for (const auto& [n, a] : arrays) {
    if (n != name) continue;
    if (expect != 0 && a.data.size() != expect) {
      throw DataError(kind + " model: array '" + n + "' has " + std::to_string(a.data.size()) + " values, expected " +
                      std::to_string(expect));
    }
    return a;
  }
  throw DataError(kind + " model: missing array '" + std::string(name) + "'");
}

std::vector<double> ModelFile::doubles(std::string_view name, std::size_t expect) const {
  const auto& a = array(name, expect);
  return {a.data.begin(), a.data.end()};
}

void write_file_atomic(const std::string& path, const std::function<void(std::ostream&)>& body) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open '" + tmp.string() + "' for writing");
    body(out);
    out.flush();
    if (!out) throw DataError("write failed on '" + tmp.string() + "'");
  }
  fs::rename(tmp, target);
}

void write_text_atomic(const std::string& path, const std::string& text) {
  write_file_atomic(path, [&](std::ostream& out) { out << text; });
}

void write_model_file(const std::string& path, const ModelFile& model) {
  json header = model.meta;
  header["kind"] = model.kind;
  header["format_version"] = kModelVersion;
  json arrays = json::array();
  std::size_t offset = 0;
  for (const auto& [name, a] : model.arrays) {
    arrays.push_back(json{{"name", name}, {"shape", a.shape}, {"offset", offset}, {"count", a.data.size()}});
    offset += a.data.size();
  }
  header["arrays"] = arrays;
  const std::string text = header.dump();

  write_file_atomic(path, [&](std::ostream& out) {
    out.write(kModelMagic, 4);
    byteio::put(out, kModelVersion);
    byteio::put_string(out, text);
    for (const auto& [name, a] : model.arrays) byteio::put_floats(out, a.data.data(), a.data.size());
  });
}

ModelFile read_model_file(const std::string& path, std::string_view expect_kind) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifact("model file '" + path + "' not found");
  char magic[4] = {};
  in.read(magic, 4);
  if (in.gcount() != 4 || std::memcmp(magic, kModelMagic, 4) != 0) {
    throw FormatError(FormatError::Kind::BadMagic, "'" + path + "': bad magic (not a PFVM model file)");
  }
  std::uint8_t version = 0;
  if (!byteio::get(in, version)) throw FormatError(FormatError::Kind::TruncatedRecord, "'" + path + "': truncated header");
  if (version != kModelVersion) {
    throw FormatError(FormatError::Kind::VersionMismatch,
                      "'" + path + "': model format version " + std::to_string(version) + " not supported");
  }
  std::string text;
  if (!byteio::get_string(in, text, 1u << 28)) {
    throw FormatError(FormatError::Kind::TruncatedRecord, "'" + path + "': truncated metadata");
  }
  ModelFile m;
  try {
    m.meta = json::parse(text);
    m.kind = m.meta.at("kind").get<std::string>();
    const json arrays = m.meta.at("arrays");
    m.meta.erase("arrays");
    m.meta.erase("kind");
    m.meta.erase("format_version");
    for (const auto& a : arrays) {
      ModelArray arr;
      arr.shape = a.at("shape").get<std::vector<std::size_t>>();
      arr.data.resize(a.at("count").get<std::size_t>());
      if (!byteio::get_floats(in, arr.data.data(), arr.data.size())) {
        throw FormatError(FormatError::Kind::TruncatedRecord, "'" + path + "': truncated array payload");
      }
      m.arrays.emplace_back(a.at("name").get<std::string>(), std::move(arr));
    }
  } catch (const json::exception& e) {
    throw FormatError(FormatError::Kind::InvalidRecord, "'" + path + "': bad metadata: " + e.what());
  }
  if (!expect_kind.empty() && m.kind != expect_kind) {
    throw DataError("'" + path + "': expected a '" + std::string(expect_kind) + "' model, found '" + m.kind + "'");
  }
  return m;
}

}  // namespace fgpart
