#pragma once

// PFV1: the binary container of per-proposal conv feature maps. Byte layout
// is documented in docs/FORMATS.md. All integers and floats are little-endian.

#include <cstdint>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fgpart/geometry.hpp"

namespace fgpart {

inline constexpr char kFeatureMagic[4] = {'P', 'F', 'V', '1'};
inline constexpr std::uint8_t kFeatureVersion = 1;

enum class Split : std::uint8_t { Train = 0, Test = 1 };

const char* to_string(Split s);
Split parse_split(const std::string& s);

/// One object proposal: its box in the source image and its grid x grid x
/// channels activation map, stored row, column, channel order.
struct ProposalRecord {
  Box box;
  int grid = 0;
  int channels = 0;
  std::vector<float> values;

  std::span<const float> cell(int row, int col) const {
    return {values.data() + (static_cast<std::size_t>(row) * grid + col) * channels,
            static_cast<std::size_t>(channels)};
  }

  friend bool operator==(const ProposalRecord&, const ProposalRecord&) = default;
};

struct ImageHeader {
  std::string image_id;
  int label = 0;
  Split split = Split::Train;
  int width = 0;
  int height = 0;
  std::uint32_t proposal_count = 0;

  friend bool operator==(const ImageHeader&, const ImageHeader&) = default;
};

struct ImageRecord {
  std::string image_id;
  int label = 0;
  Split split = Split::Train;
  int width = 0;
  int height = 0;
  std::vector<ProposalRecord> proposals;

  ImageHeader header() const;
  Box image_box() const { return Box{0, 0, width, height}; }

  friend bool operator==(const ImageRecord&, const ImageRecord&) = default;
};

/// Throws FormatError(InvalidRecord) describing the first violated invariant.
void validate_header(const ImageHeader& h);
void validate_proposal(const ProposalRecord& p, const ImageHeader& owner);
void validate_record(const ImageRecord& r);

/// Streaming writer. Proposals are written as they arrive; memory use is
/// independent of file size.
class FeatureWriter {
 public:
  FeatureWriter(const std::string& path, const std::string& comment = {});
  ~FeatureWriter();
  FeatureWriter(const FeatureWriter&) = delete;
  FeatureWriter& operator=(const FeatureWriter&) = delete;

  void begin_image(const ImageHeader& header);
  void write_proposal(const ProposalRecord& proposal);
  void write(const ImageRecord& record);

  /// Flushes and checks that the last image received all its proposals.
  void close();

 private:
  void finish_image();

  std::string path_;
  std::ofstream out_;
  std::optional<ImageHeader> current_;
  std::uint32_t written_ = 0;
};

/// Streaming reader: next_image() then up to proposal_count read_proposal()
/// calls. Unread proposals are skipped by the following next_image().
class FeatureReader {
 public:
  explicit FeatureReader(const std::string& path);

  const std::string& comment() const { return comment_; }

  std::optional<ImageHeader> next_image();
  std::uint32_t proposals_remaining() const { return remaining_; }
  ProposalRecord read_proposal();

  /// Materializes the next whole image.
  std::optional<ImageRecord> next();

 private:
  void skip_remaining();
  [[noreturn]] void truncated(const std::string& what) const;

  std::string path_;
  std::ifstream in_;
  std::string comment_;
  std::optional<ImageHeader> current_;
  std::uint32_t remaining_ = 0;
  std::uint32_t index_ = 0;
};

void write_features(const std::string& path, std::span<const ImageRecord> records, const std::string& comment = {});
std::vector<ImageRecord> read_all_features(const std::string& path);

}  // namespace fgpart
