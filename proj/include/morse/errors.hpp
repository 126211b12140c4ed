#pragma once

#include <stdexcept>
#include <string>

namespace morse {

enum class ErrorKind {
  kInvalidInput,        // shapes, empty inputs, malformed values
  kHypothesis,          // a precondition of an identity does not hold
  kDegenerate,          // a form that must be nondegenerate is not
  kNotTransverse,       // a required transversality fails
  kSearchExhausted,     // no admissible complement / epsilon found
  kDriftExceeded,       // integrator left the symplectic group
  kUnresolvedCrossing,  // crossings cluster below the sampling resolution
  kFocalEndpoint,       // the final instant is focal
  kNonConvergence,      // mesh or step refinement never stabilised
  kParse,               // configuration could not be read
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace morse
