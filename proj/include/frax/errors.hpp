#pragma once

#include <stdexcept>
#include <string>

namespace frax {

/// Error categories raised by the library. Each value maps to one failure
/// mode named in the module contracts; tests match on the code rather than
/// the message text.
enum class ErrorCode {
  OverlappingFractures,
  AmbiguousBoundaryPoint,
  NotFitted,
  DegenerateCut,
  SingularTensor,
  NoDirichlet,
  NotSPD,
  NoConvergence,
  Singular,
  SingularTransportSystem,
  UnknownBenchmark,
  MissingGeometryFile,
  PointOutsideDomain,
  IoError,
  InvalidArgument,
};

class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}

  ErrorCode code() const { return code_; }

private:
  ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) raise(code, what);
}

}  // namespace frax
