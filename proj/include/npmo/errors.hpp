#pragma once

#include <stdexcept>
#include <string>

namespace npmo {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define NPMO_DEFINE_ERROR(Name)          \
  class Name : public Error {            \
   public:                               \
    using Error::Error;                  \
  };

NPMO_DEFINE_ERROR(InvalidScenario)
NPMO_DEFINE_ERROR(PlacementFailure)
NPMO_DEFINE_ERROR(IllegalAction)
NPMO_DEFINE_ERROR(EpisodeFinished)
NPMO_DEFINE_ERROR(UnknownObject)
NPMO_DEFINE_ERROR(ShapeMismatch)
NPMO_DEFINE_ERROR(NoLegalAction)
NPMO_DEFINE_ERROR(ExpertTooWeak)
NPMO_DEFINE_ERROR(NonFiniteLoss)
NPMO_DEFINE_ERROR(FullyExpanded)
NPMO_DEFINE_ERROR(CheckpointMissing)
NPMO_DEFINE_ERROR(ConfigError)

#undef NPMO_DEFINE_ERROR

// Parse failure carrying the offending field path and, for line-oriented
// formats, the 1-based line number (0 when not applicable).
class ParseError : public Error {
 public:
  ParseError(std::string field, const std::string& what, int line = 0)
      : Error(format(field, what, line)), field_(std::move(field)), detail_(what), line_(line) {}

  const std::string& field() const { return field_; }
  int line() const { return line_; }
  const std::string& detail() const { return detail_; }

 private:
  static std::string format(const std::string& field, const std::string& what, int line) {
    std::string msg = "parse error";
    if (line > 0) msg += " at line " + std::to_string(line);
    if (!field.empty()) msg += " in field '" + field + "'";
    return msg + ": " + what;
  }

  std::string field_;
  std::string detail_;
  int line_;
};

}  // namespace npmo
