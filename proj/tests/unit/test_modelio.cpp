#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "fgpart/errors.hpp"
#include "fgpart/modelio.hpp"
#include "test_util.hpp"

using namespace fgpart;

namespace {

ModelFile sample() {
  ModelFile m;
  m.kind = "thing";
  m.meta["answer"] = 42;
  m.meta["name"] = "x";
  m.add("a", {2, 3}, std::vector<float>{1, 2, 3, 4, 5, 6});
  const std::vector<double> d{0.1, -0.25};
  m.add("b", {2}, std::span<const double>(d));
  m.add("empty", {0}, std::vector<float>{});
  return m;
}

}  // namespace

TEST_CASE("model files round trip") {
  testutil::TempDir dir("modelio");
  const std::string path = dir.file("m.pfvm");
  write_model_file(path, sample());
  const ModelFile back = read_model_file(path, "thing");
  CHECK(back.kind == "thing");
  CHECK(back.meta.at("answer") == 42);
  CHECK(back.meta.at("name") == "x");
  CHECK(back.array("a").shape == std::vector<std::size_t>{2, 3});
  CHECK(back.array("a", 6).data == std::vector<float>{1, 2, 3, 4, 5, 6});
  CHECK(back.doubles("b") == std::vector<double>{static_cast<float>(0.1), -0.25});
  CHECK(back.has("empty"));
  CHECK_FALSE(back.has("c"));
  CHECK_THROWS_AS(back.array("c"), DataError);
  CHECK_THROWS_AS(back.array("a", 5), DataError);
  CHECK(testutil::read_bytes(path).substr(0, 4) == "PFVM");
  CHECK_FALSE(std::filesystem::exists(path + ".tmp"));
}

TEST_CASE("model file errors") {
  testutil::TempDir dir("modelio");
  const std::string path = dir.file("m.pfvm");
  write_model_file(path, sample());
  CHECK_THROWS_AS(read_model_file(path, "other"), DataError);
  CHECK_THROWS_AS(read_model_file(dir.file("missing.pfvm")), MissingArtifact);

  const std::string bytes = testutil::read_bytes(path);
  auto put = [&](const std::string& b) {
    std::ofstream(dir.file("bad.pfvm"), std::ios::binary) << b;
    return dir.file("bad.pfvm");
  };
  try {
    read_model_file(put("PFV1" + bytes.substr(4)));
    FAIL("expected an error");
  } catch (const FormatError& e) {
    CHECK(e.kind() == FormatError::Kind::BadMagic);
  }
  std::string v = bytes;
  v[4] = 2;
  try {
    read_model_file(put(v));
    FAIL("expected an error");
  } catch (const FormatError& e) {
    CHECK(e.kind() == FormatError::Kind::VersionMismatch);
  }
  try {
    read_model_file(put(bytes.substr(0, bytes.size() - 1)));
    FAIL("expected an error");
  } catch (const FormatError& e) {
    CHECK(e.kind() == FormatError::Kind::TruncatedRecord);
  }
}

TEST_CASE("atomic writes replace the target in one step") {
  testutil::TempDir dir("modelio");
  const std::string path = dir.file("nested/out.txt");
  write_text_atomic(path, "first");
  write_text_atomic(path, "second");
  CHECK(testutil::read_bytes(path) == "second");
  CHECK_FALSE(std::filesystem::exists(path + ".tmp"));
  CHECK_THROWS_AS(sample().add("bad", {2, 2}, std::vector<float>{1}), std::invalid_argument);
}
