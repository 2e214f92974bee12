#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace neurolip {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EmptyStreamError : public Error {
 public:
  EmptyStreamError() : Error("event stream is empty") {}
};

class InvalidRoiError : public Error {
 public:
  using Error::Error;
};

/// Raised by the stream/manifest readers. `record()` is the zero-based index of
/// the offending record (event or manifest line).
class ParseError : public Error {
 public:
  ParseError(std::size_t record, const std::string& what)
      : Error("record " + std::to_string(record) + ": " + what), record_(record) {}
  std::size_t record() const noexcept { return record_; }

 private:
  std::size_t record_;
};

class SplitError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace neurolip
