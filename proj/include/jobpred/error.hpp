#pragma once

#include <stdexcept>
#include <string>

namespace jobpred {

enum class ErrorKind {
  shape,
  label,
  numeric,
  config,
  vocabulary,
  length,
  compatibility,
  format,
  parse,
  input,
  divergence,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::shape: return "shape error";
    case ErrorKind::label: return "label error";
    case ErrorKind::numeric: return "numeric error";
    case ErrorKind::config: return "config error";
    case ErrorKind::vocabulary: return "vocabulary error";
    case ErrorKind::length: return "length error";
    case ErrorKind::compatibility: return "compatibility error";
    case ErrorKind::format: return "format error";
    case ErrorKind::parse: return "parse error";
    case ErrorKind::input: return "input error";
    case ErrorKind::divergence: return "divergence error";
  }
  return "error";
}

/// Every library failure is an Error carrying its kind; callers that need
/// to map failures (CLI exit codes, HTTP statuses) switch on kind().
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define JOBPRED_DEFINE_ERROR(Name, Kind)                                   \
  class Name : public Error {                                              \
   public:                                                                 \
    explicit Name(const std::string& message) : Error(Kind, message) {}    \
  };

JOBPRED_DEFINE_ERROR(ShapeError, ErrorKind::shape)
JOBPRED_DEFINE_ERROR(LabelError, ErrorKind::label)
JOBPRED_DEFINE_ERROR(NumericError, ErrorKind::numeric)
JOBPRED_DEFINE_ERROR(ConfigError, ErrorKind::config)
JOBPRED_DEFINE_ERROR(VocabularyError, ErrorKind::vocabulary)
JOBPRED_DEFINE_ERROR(LengthError, ErrorKind::length)
JOBPRED_DEFINE_ERROR(CompatibilityError, ErrorKind::compatibility)
JOBPRED_DEFINE_ERROR(FormatError, ErrorKind::format)
JOBPRED_DEFINE_ERROR(ParseError, ErrorKind::parse)
JOBPRED_DEFINE_ERROR(InputError, ErrorKind::input)
JOBPRED_DEFINE_ERROR(DivergenceError, ErrorKind::divergence)

#undef JOBPRED_DEFINE_ERROR

}  // namespace jobpred
