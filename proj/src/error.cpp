#include "cdbayes/error.hpp"

namespace cdbayes {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MalformedRow: return "MalformedRow";
    case ErrorKind::SchemaError: return "SchemaError";
    case ErrorKind::InvariantViolation: return "InvariantViolation";
    case ErrorKind::MissingBaseline: return "MissingBaseline";
    case ErrorKind::UnknownCovariate: return "UnknownCovariate";
    case ErrorKind::EmptySpec: return "EmptySpec";
    case ErrorKind::InvalidPrior: return "InvalidPrior";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::InvalidLayout: return "InvalidLayout";
    case ErrorKind::NonFinite: return "NonFinite";
    case ErrorKind::SingularSystem: return "SingularSystem";
    case ErrorKind::DegenerateSS: return "DegenerateSS";
    case ErrorKind::InsufficientDraws: return "InsufficientDraws";
    case ErrorKind::SpecMismatch: return "SpecMismatch";
    case ErrorKind::Io: return "Io";
  }
  return "Error";
}

}  // namespace cdbayes
