#pragma once

#include <stdexcept>
#include <string>

namespace ossireg {

enum class ErrorCode {
  kInvalidInput,   // bad arguments, missing files, invariant violations
  kParse,          // malformed mesh / region / pose / parameterization file
  kFormat,         // image that does not follow the coordinate-map layout
  kDegenerate,     // empty or geometrically degenerate data
  kNoConsensus,    // robust estimator found no acceptable model
  kNumerical,      // solver or tracer failed to converge
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace ossireg
