#pragma once

#include <stdexcept>
#include <string>

namespace mmfair {

enum class ErrorCode {
  shape,         // dimension mismatch between matrices and topology
  domain,        // argument outside the mathematical domain (non-PD weight, ...)
  conditioning,  // near-singular matrix
  solver,        // numerical routine failed to bracket / converge
  feasibility,   // power budget violated
  config,        // invalid scenario or options
  input,         // malformed external input (CNF, JSON)
  budget,        // enumeration size over the allowed budget
  io,
};

const char* to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace mmfair
