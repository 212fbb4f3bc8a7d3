#include "fgpart/manifest.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <set>

#include "json.hpp"

#include "fgpart/errors.hpp"

namespace fgpart {

using nlohmann::json;

void DatasetManifest::validate(bool require_both_splits) const {
  if (class_names.empty()) throw DataError("manifest: empty class table");
  std::set<int> used;
  bool has_train = false, has_test = false;
  for (const auto& e : entries) {
    if (e.label < 0 || e.label >= class_count()) {
      throw DataError("manifest: label " + std::to_string(e.label) + " of '" + e.path + "' outside [0, " +
                      std::to_string(class_count()) + ")");
    }
    used.insert(e.label);
    (e.split == Split::Train ? has_train : has_test) = true;
  }
  if (static_cast<int>(used.size()) != class_count()) throw DataError("manifest: labels are not dense (unused classes)");
  if (require_both_splits && (!has_train || !has_test)) throw DataError("manifest: train and test splits must both be non-empty");
}

std::vector<ManifestEntry> parse_manifest_lines(std::istream& in) {
  std::vector<ManifestEntry> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      ManifestEntry e;
      e.path = j.at("path").get<std::string>();
      e.label = j.at("label").get<int>();
      e.split = parse_split(j.at("split").get<std::string>());
      if (e.path.empty()) throw DataError("empty path");
      out.push_back(std::move(e));
    } catch (const json::exception& ex) {
      throw DataError("manifest line " + std::to_string(lineno) + ": " + ex.what());
    } catch (const DataError& ex) {
      throw DataError("manifest line " + std::to_string(lineno) + ": " + ex.what());
    }
  }
  return out;
}

void write_manifest_lines(std::ostream& out, const std::vector<ManifestEntry>& entries) {
  for (const auto& e : entries) {
    json j{{"path", e.path}, {"label", e.label}, {"split", to_string(e.split)}};
    out << j.dump() << '\n';
  }
}

std::vector<std::string> parse_class_table(std::istream& in) {
  try {
    const json j = json::parse(in);
    return j.at("classes").get<std::vector<std::string>>();
  } catch (const json::exception& ex) {
    throw DataError(std::string("class table: ") + ex.what());
  }
}

void write_class_table(std::ostream& out, const std::vector<std::string>& names) {
  out << json{{"classes", names}}.dump(2) << '\n';
}

DatasetManifest load_manifest(const std::string& manifest_path, const std::string& classes_path) {
  std::ifstream m(manifest_path);
  if (!m) throw DataError("cannot open manifest '" + manifest_path + "'");
  std::ifstream c(classes_path);
  if (!c) throw DataError("cannot open class table '" + classes_path + "'");
  DatasetManifest d{parse_manifest_lines(m), parse_class_table(c)};
  d.validate(false);
  return d;
}

}  // namespace fgpart
