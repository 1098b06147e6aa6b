#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace noisebench {

/// Root of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller broke a documented precondition (bad shape, empty input, n = 0, ...).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

/// Input bytes do not follow the expected container layout (magic, header fields).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Input ended before the layout said it would.
class LengthError : public Error {
 public:
  LengthError(const std::string& what, std::size_t expected, std::size_t actual)
      : Error(what + ": expected " + std::to_string(expected) + " bytes, got " +
              std::to_string(actual)),
        expected_(expected),
        actual_(actual) {}

  std::size_t expected() const noexcept { return expected_; }
  std::size_t actual() const noexcept { return actual_; }

 private:
  std::size_t expected_;
  std::size_t actual_;
};

/// Structurally valid container holding an out-of-range value.
class CorruptDataError : public Error {
 public:
  CorruptDataError(const std::string& what, std::size_t index)
      : Error(what + " at index " + std::to_string(index)), index_(index) {}

  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite loss.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Peer violated the classifier wire protocol.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

/// External classifier could not be reached, timed out, or died.
class ClassifierError : public Error {
 public:
  using Error::Error;
};

}  // namespace noisebench
