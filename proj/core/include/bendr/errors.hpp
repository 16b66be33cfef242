#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace bendr {

// Root of every error the library raises. Subclasses carry the failure
// category so callers (the CLI in particular) can map them to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : Error(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class AnnotationError : public Error {
 public:
  AnnotationError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ChannelError : public Error {
 public:
  explicit ChannelError(std::string label)
      : Error("channel not found: '" + label + "'"), label_(std::move(label)) {}
  const std::string& label() const noexcept { return label_; }

 private:
  std::string label_;
};

#define BENDR_DECLARE_ERROR(Name) \
  class Name : public Error {     \
   public:                        \
    using Error::Error;           \
  }

BENDR_DECLARE_ERROR(UnsupportedError);
BENDR_DECLARE_ERROR(DesignError);
BENDR_DECLARE_ERROR(SignalError);
BENDR_DECLARE_ERROR(ShapeError);
BENDR_DECLARE_ERROR(NumericsError);
BENDR_DECLARE_ERROR(CheckpointError);
BENDR_DECLARE_ERROR(SamplerError);
BENDR_DECLARE_ERROR(TrainError);
BENDR_DECLARE_ERROR(ProtocolError);
BENDR_DECLARE_ERROR(MetricError);
BENDR_DECLARE_ERROR(ConfigError);
BENDR_DECLARE_ERROR(SpecError);

#undef BENDR_DECLARE_ERROR

}  // namespace bendr
