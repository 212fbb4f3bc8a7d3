#include "fgpart/featio.hpp"

#include <cmath>
#include <cstring>

#include "fgpart/byteio.hpp"
#include "fgpart/errors.hpp"

namespace fgpart {
namespace {

constexpr std::uint32_t kMaxText = 1u << 20;
constexpr std::uint64_t kMaxValues = std::uint64_t{1} << 32;

[[noreturn]] void invalid(const std::string& what) { throw FormatError(FormatError::Kind::InvalidRecord, what); }

}  // namespace

const char* to_string(Split s) { return s == Split::Train ? "train" : "test"; }

Split parse_split(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "test") return Split::Test;
  throw DataError("unknown split '" + s + "' (expected train or test)");
}

ImageHeader ImageRecord::header() const {
  return ImageHeader{image_id, label, split, width, height, static_cast<std::uint32_t>(proposals.size())};
}

void validate_header(const ImageHeader& h) {
  if (h.image_id.empty()) invalid("image record: empty image_id");
  if (h.image_id.size() > kMaxText) invalid("image record: image_id too long");
  if (h.label < 0) invalid("image '" + h.image_id + "': negative label");
  if (h.width < 1 || h.height < 1) invalid("image '" + h.image_id + "': image size must be positive");
  if (h.proposal_count < 1) invalid("image '" + h.image_id + "': at least one proposal required");
}

void validate_proposal(const ProposalRecord& p, const ImageHeader& owner) {
  const std::string where = "image '" + owner.image_id + "' proposal: ";
  if (p.grid < 1) invalid(where + "grid must be >= 1");
  if (p.channels < 1) invalid(where + "channels must be >= 1");
  const std::uint64_t expect = std::uint64_t(p.grid) * std::uint64_t(p.grid) * std::uint64_t(p.channels);
  if (expect >= kMaxValues) invalid(where + "feature map too large");
  if (p.values.size() != expect) {
    invalid(where + "expected " + std::to_string(expect) + " values, got " + std::to_string(p.values.size()));
  }
  if (p.box.empty() || p.box.x0 < 0 || p.box.y0 < 0 || p.box.x1 > owner.width || p.box.y1 > owner.height) {
    invalid(where + "box outside image bounds");
  }
  for (float v : p.values) {
    if (!std::isfinite(v)) invalid(where + "non-finite activation");
  }
}

void validate_record(const ImageRecord& r) {
  const ImageHeader h = r.header();
  validate_header(h);
  for (const auto& p : r.proposals) validate_proposal(p, h);
}

// ---------------------------------------------------------------- writer

FeatureWriter::FeatureWriter(const std::string& path, const std::string& comment)
    : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
  if (!out_) throw DataError("cannot open '" + path + "' for writing");
  if (comment.size() > kMaxText) throw std::invalid_argument("PFV1 comment too long");
  out_.write(kFeatureMagic, 4);
  byteio::put(out_, kFeatureVersion);
  byteio::put_string(out_, comment);
}

FeatureWriter::~FeatureWriter() {
  if (out_.is_open()) out_.close();
}

void FeatureWriter::finish_image() {
  if (current_ && written_ != current_->proposal_count) {
    throw std::logic_error("image '" + current_->image_id + "' declared " + std::to_string(current_->proposal_count) +
                           " proposals but " + std::to_string(written_) + " were written");
  }
  current_.reset();
  written_ = 0;
}

void FeatureWriter::begin_image(const ImageHeader& h) {
  finish_image();
  validate_header(h);
  byteio::put_string(out_, h.image_id);
  byteio::put(out_, static_cast<std::int32_t>(h.label));
  byteio::put(out_, static_cast<std::uint8_t>(h.split));
  byteio::put(out_, static_cast<std::uint32_t>(h.width));
  byteio::put(out_, static_cast<std::uint32_t>(h.height));
  byteio::put(out_, h.proposal_count);
  current_ = h;
}

void FeatureWriter::write_proposal(const ProposalRecord& p) {
  if (!current_) throw std::logic_error("write_proposal before begin_image");
  if (written_ >= current_->proposal_count) throw std::logic_error("too many proposals for image '" + current_->image_id + "'");
  validate_proposal(p, *current_);
  byteio::put(out_, p.box.x0);
  byteio::put(out_, p.box.y0);
  byteio::put(out_, p.box.x1);
  byteio::put(out_, p.box.y1);
  byteio::put(out_, static_cast<std::uint32_t>(p.grid));
  byteio::put(out_, static_cast<std::uint32_t>(p.channels));
  byteio::put_floats(out_, p.values.data(), p.values.size());
  ++written_;
  if (!out_) throw DataError("write failed on '" + path_ + "'");
}

void FeatureWriter::write(const ImageRecord& r) {
  validate_record(r);
  begin_image(r.header());
  for (const auto& p : r.proposals) write_proposal(p);
}

void FeatureWriter::close() {
  finish_image();
  out_.flush();
  if (!out_) throw DataError("write failed on '" + path_ + "'");
  out_.close();
}

// ---------------------------------------------------------------- reader

FeatureReader::FeatureReader(const std::string& path) : path_(path), in_(path, std::ios::binary) {
  if (!in_) throw DataError("cannot open '" + path + "'");
  char magic[4] = {};
  in_.read(magic, 4);
  if (in_.gcount() != 4 || std::memcmp(magic, kFeatureMagic, 4) != 0) {
    throw FormatError(FormatError::Kind::BadMagic, "'" + path + "': bad magic (not a PFV1 file)");
  }
  std::uint8_t version = 0;
  if (!byteio::get(in_, version)) truncated("file header");
  if (version != kFeatureVersion) {
    throw FormatError(FormatError::Kind::VersionMismatch, "'" + path + "': PFV1 version " + std::to_string(version) +
                                                              " not supported (expected " +
                                                              std::to_string(kFeatureVersion) + ")");
  }
  std::uint32_t len = 0;
  if (!byteio::get(in_, len)) truncated("file header");
  if (len > kMaxText) invalid("'" + path + "': header comment too long");
  comment_.resize(len);
  in_.read(comment_.data(), len);
  if (in_.gcount() != static_cast<std::streamsize>(len)) truncated("file header");
}

void FeatureReader::truncated(const std::string& what) const {
  std::string msg = "'" + path_ + "': truncated record";
  if (!what.empty()) msg += " (" + what + ")";
  throw FormatError(FormatError::Kind::TruncatedRecord, msg);
}

void FeatureReader::skip_remaining() {
  while (remaining_ > 0) read_proposal();
}

std::optional<ImageHeader> FeatureReader::next_image() {
  skip_remaining();
  current_.reset();
  if (in_.peek() == std::char_traits<char>::eof()) return std::nullopt;

  ImageHeader h;
  const std::string where = "image #" + std::to_string(index_);
  std::uint32_t len = 0;
  if (!byteio::get(in_, len)) truncated(where + " header");
  if (len == 0 || len > kMaxText) invalid("'" + path_ + "': " + where + " has invalid image_id length");
  h.image_id.resize(len);
  in_.read(h.image_id.data(), len);
  if (in_.gcount() != static_cast<std::streamsize>(len)) truncated(where + " image_id");

  std::int32_t label = 0;
  std::uint8_t split = 0;
  std::uint32_t width = 0, height = 0;
  if (!byteio::get(in_, label) || !byteio::get(in_, split) || !byteio::get(in_, width) || !byteio::get(in_, height) ||
      !byteio::get(in_, h.proposal_count)) {
    truncated("image '" + h.image_id + "' header");
  }
  if (split > 1) invalid("image '" + h.image_id + "': unknown split code " + std::to_string(split));
  if (width > INT32_MAX || height > INT32_MAX) invalid("image '" + h.image_id + "': image size out of range");
  h.label = label;
  h.split = static_cast<Split>(split);
  h.width = static_cast<int>(width);
  h.height = static_cast<int>(height);
  validate_header(h);
  current_ = h;
  remaining_ = h.proposal_count;
  ++index_;
  return h;
}

ProposalRecord FeatureReader::read_proposal() {
  if (!current_ || remaining_ == 0) throw std::logic_error("read_proposal: no proposal pending");
  const std::string& id = current_->image_id;
  ProposalRecord p;
  std::uint32_t grid = 0, channels = 0;
  if (!byteio::get(in_, p.box.x0) || !byteio::get(in_, p.box.y0) || !byteio::get(in_, p.box.x1) ||
      !byteio::get(in_, p.box.y1) || !byteio::get(in_, grid) || !byteio::get(in_, channels)) {
    truncated("image '" + id + "' proposal header");
  }
  if (grid < 1 || channels < 1 || grid > 65535 || channels > (1u << 24)) {
    invalid("image '" + id + "': invalid proposal shape");
  }
  const std::uint64_t count = std::uint64_t(grid) * grid * channels;
  if (count >= kMaxValues) invalid("image '" + id + "': proposal payload too large");
  p.grid = static_cast<int>(grid);
  p.channels = static_cast<int>(channels);
  p.values.resize(count);
  if (!byteio::get_floats(in_, p.values.data(), p.values.size())) truncated("image '" + id + "' proposal payload");
  validate_proposal(p, *current_);
  --remaining_;
  return p;
}

std::optional<ImageRecord> FeatureReader::next() {
  auto h = next_image();
  if (!h) return std::nullopt;
  ImageRecord r{h->image_id, h->label, h->split, h->width, h->height, {}};
  r.proposals.reserve(h->proposal_count);
  while (remaining_ > 0) r.proposals.push_back(read_proposal());
  return r;
}

void write_features(const std::string& path, std::span<const ImageRecord> records, const std::string& comment) {
  for (const auto& r : records) validate_record(r);
  FeatureWriter w(path, comment);
  for (const auto& r : records) w.write(r);
  w.close();
}

std::vector<ImageRecord> read_all_features(const std::string& path) {
  FeatureReader reader(path);
  std::vector<ImageRecord> out;
  while (auto r = reader.next()) out.push_back(std::move(*r));
  return out;
}

}  // namespace fgpart
