#pragma once

#include <stdexcept>
#include <string>

namespace cdbayes {

enum class ErrorKind {
  MalformedRow,
  SchemaError,
  InvariantViolation,
  MissingBaseline,
  UnknownCovariate,
  EmptySpec,
  InvalidPrior,
  InvalidConfig,
  InvalidLayout,
  NonFinite,
  SingularSystem,
  DegenerateSS,
  InsufficientDraws,
  SpecMismatch,
  Io,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind), detail_(what) {}

  ErrorKind kind() const noexcept { return kind_; }
  // Message without the kind prefix.
  const std::string& detail() const noexcept { return detail_; }

  // True for failures raised while sampling, as opposed to bad input.
  bool is_sampler_error() const noexcept {
    return kind_ == ErrorKind::SingularSystem || kind_ == ErrorKind::DegenerateSS ||
           kind_ == ErrorKind::NonFinite;
  }

 private:
  ErrorKind kind_;
  std::string detail_;
};

}  // namespace cdbayes
