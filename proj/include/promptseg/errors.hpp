#pragma once

#include <stdexcept>
#include <string>

namespace promptseg {

/// Base of every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller violated an operation's precondition (bad dimensions, out-of-range
/// coordinate, wrong sample kind).
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Malformed stored data: RLE whose counts do not add up, polygon with too few
/// vertices, unparseable annotation file.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Model text that could not be turned into geometry or a verdict. Carries the
/// raw text so callers can log it.
class ParseError : public Error {
 public:
  enum class Kind { box, points, answer };

  ParseError(Kind kind, std::string message, std::string raw)
      : Error(std::move(message)), kind_(kind), raw_(std::move(raw)) {}

  Kind kind() const noexcept { return kind_; }
  const std::string& raw() const noexcept { return raw_; }

 private:
  Kind kind_;
  std::string raw_;
};

const char* to_string(ParseError::Kind kind) noexcept;

/// Failure reported by a segmenter backend.
class SegmenterError : public Error {
 public:
  SegmenterError(std::string code, std::string message, bool retryable)
      : Error(std::move(message)), code_(std::move(code)), retryable_(retryable) {}

  const std::string& code() const noexcept { return code_; }
  bool retryable() const noexcept { return retryable_; }

 private:
  std::string code_;
  bool retryable_;
};

/// Failure reported by a responder binding (scripted fixture gap, transport).
class ResponderError : public Error {
 public:
  ResponderError(std::string code, std::string message, bool retryable = false)
      : Error(std::move(message)), code_(std::move(code)), retryable_(retryable) {}

  const std::string& code() const noexcept { return code_; }
  bool retryable() const noexcept { return retryable_; }

 private:
  std::string code_;
  bool retryable_;
};

/// The whole image is covered by the mask, so no negative point can be drawn.
class NoNegativeCandidates : public Error {
 public:
  using Error::Error;
};

/// A pipeline stage failed as a whole (e.g. every segmenter call for a sample).
class PipelineError : public Error {
 public:
  using Error::Error;
};

}  // namespace promptseg
