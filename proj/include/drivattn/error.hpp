#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace drivattn {

enum class ErrorKind {
  EmptyInput,
  WindowOutOfBounds,
  SingleClassInput,
  EmptyBand,
  ShapeMismatch,
  NotForwarded,
  EmptyDataset,
  LengthMismatch,
  EmptySpace,
  TooFewRows,
  DimensionMismatch,
  InvalidModel,
  TooFewSubjects,
  AllZeroDifferences,
  TooFewPairs,
  ZeroVariance,
  TooFewTrials,
  MissingCell,
  SubjectMismatch,
  ConfigInvalid,
  Format,
  Io,
};

inline std::string_view to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::WindowOutOfBounds: return "WindowOutOfBounds";
    case ErrorKind::SingleClassInput: return "SingleClassInput";
    case ErrorKind::EmptyBand: return "EmptyBand";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::NotForwarded: return "NotForwarded";
    case ErrorKind::EmptyDataset: return "EmptyDataset";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::EmptySpace: return "EmptySpace";
    case ErrorKind::TooFewRows: return "TooFewRows";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::InvalidModel: return "InvalidModel";
    case ErrorKind::TooFewSubjects: return "TooFewSubjects";
    case ErrorKind::AllZeroDifferences: return "AllZeroDifferences";
    case ErrorKind::TooFewPairs: return "TooFewPairs";
    case ErrorKind::ZeroVariance: return "ZeroVariance";
    case ErrorKind::TooFewTrials: return "TooFewTrials";
    case ErrorKind::MissingCell: return "MissingCell";
    case ErrorKind::SubjectMismatch: return "SubjectMismatch";
    case ErrorKind::ConfigInvalid: return "ConfigInvalid";
    case ErrorKind::Format: return "Format";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

// Every failure in the library is reported through this type; `kind()` lets
// callers (the CLI in particular) map failures onto exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) fail(kind, what);
}

}  // namespace drivattn
