#pragma once

#include <stdexcept>
#include <string>

namespace fgpart {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad command line or configuration.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// A stage was asked to run before the stage producing its inputs.
class MissingArtifact : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent data (feature files, models, datasets).
class DataError : public Error {
 public:
  using Error::Error;
};

class FormatError : public DataError {
 public:
  enum class Kind { BadMagic, VersionMismatch, TruncatedRecord, InvalidRecord };

  FormatError(Kind kind, const std::string& what) : DataError(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

}  // namespace fgpart
