#include "gamaudit/error.hpp"

namespace gamaudit {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config: return "config error";
    case ErrorKind::Parse: return "parse error";
    case ErrorKind::Data: return "data error";
    case ErrorKind::Degenerate: return "degenerate data";
    case ErrorKind::Split: return "split error";
    case ErrorKind::Basis: return "basis error";
    case ErrorKind::SingularFit: return "singular fit";
    case ErrorKind::Prediction: return "prediction error";
    case ErrorKind::Rule: return "rule error";
    case ErrorKind::Generation: return "generation error";
    case ErrorKind::Training: return "training error";
    case ErrorKind::Detection: return "detection error";
  }
  return "error";
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config:
    case ErrorKind::Rule:
    case ErrorKind::Generation:
      return 2;
    case ErrorKind::Parse:
    case ErrorKind::Data:
    case ErrorKind::Degenerate:
    case ErrorKind::Split:
    case ErrorKind::Prediction:
      return 3;
    case ErrorKind::Basis:
    case ErrorKind::SingularFit:
    case ErrorKind::Training:
    case ErrorKind::Detection:
      return 4;
  }
  return 4;
}

}  // namespace gamaudit
