#pragma once

#include <stdexcept>
#include <string>

namespace matinfo {

// Error codes group into four classes mirroring the CLI exit-code contract:
// usage (bad parameters), data (malformed or inadmissible input), numeric
// (solver/conditioning failures), verify (property violation).
enum class Errc {
  // usage
  BadAlpha,
  BadMu,
  BadTemperature,
  BadRatio,
  BadConfig,
  // data
  ParseError,
  NonSymmetric,
  BadDiagonal,
  ZeroVariance,
  ZeroColumn,
  SizeMismatch,
  ShapeMismatch,
  IndivisibleLength,
  AllZeroMatrix,
  DegenerateLabels,
  EmptyDirectory,
  MixedShapes,
  // numeric
  EigFailure,
  NotPsd,
  SingularLog,
  SingularSecondArgument,
  DivergedLoss,
  // verify
  VerificationFailed,
};

enum class ErrorClass { Usage = 1, Data = 2, Numeric = 3, Verify = 4 };

constexpr ErrorClass error_class(Errc c) {
  switch (c) {
    case Errc::BadAlpha:
    case Errc::BadMu:
    case Errc::BadTemperature:
    case Errc::BadRatio:
    case Errc::BadConfig:
      return ErrorClass::Usage;
    case Errc::ParseError:
    case Errc::NonSymmetric:
    case Errc::BadDiagonal:
    case Errc::ZeroVariance:
    case Errc::ZeroColumn:
    case Errc::SizeMismatch:
    case Errc::ShapeMismatch:
    case Errc::IndivisibleLength:
    case Errc::AllZeroMatrix:
    case Errc::DegenerateLabels:
    case Errc::EmptyDirectory:
    case Errc::MixedShapes:
      return ErrorClass::Data;
    case Errc::EigFailure:
    case Errc::NotPsd:
    case Errc::SingularLog:
    case Errc::SingularSecondArgument:
    case Errc::DivergedLoss:
      return ErrorClass::Numeric;
    case Errc::VerificationFailed:
      return ErrorClass::Verify;
  }
  return ErrorClass::Data;
}

const char* errc_name(Errc c);

class Error : public std::runtime_error {
 public:
  Error(Errc code, std::string message)
      : std::runtime_error(std::move(message)), code_(code) {}

  Errc code() const { return code_; }
  ErrorClass error_class() const { return matinfo::error_class(code_); }

 private:
  Errc code_;
};

[[noreturn]] inline void raise(Errc code, const std::string& message) {
  throw Error(code, std::string(errc_name(code)) + ": " + message);
}

}  // namespace matinfo
