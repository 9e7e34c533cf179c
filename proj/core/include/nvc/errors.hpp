#ifndef NVC_ERRORS_HPP
#define NVC_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace nvc {

// Exit-code classes used by the CLI: 2 = format, 3 = weights, 4 = contract.
class Error : public std::runtime_error {
 public:
  Error(std::string msg, int exit_code)
      : std::runtime_error(std::move(msg)), exit_code_(exit_code) {}
  int exit_code() const { return exit_code_; }

 private:
  int exit_code_;
};

// Violated precondition, invariant, or postcondition of an operation.
class ContractError : public Error {
 public:
  explicit ContractError(std::string msg) : Error(std::move(msg), 4) {}
};

// Malformed, truncated, or unsupported input (files, streams, headers).
class FormatError : public Error {
 public:
  explicit FormatError(std::string msg) : Error(std::move(msg), 2) {}
};

// Corrupt payload detected while decoding an otherwise well-formed stream.
class CorruptionError : public FormatError {
 public:
  explicit CorruptionError(std::string msg) : FormatError(std::move(msg)) {}
};

// A feature the format allows but this codec does not implement.
class UnsupportedError : public FormatError {
 public:
  explicit UnsupportedError(std::string msg) : FormatError(std::move(msg)) {}
};

// Stream/model incompatibility (weights hash mismatch, missing weights).
class WeightsError : public Error {
 public:
  explicit WeightsError(std::string msg) : Error(std::move(msg), 3) {}
};

inline void contract(bool cond, const std::string& msg) {
  if (!cond) throw ContractError(msg);
}

}  // namespace nvc

#endif
