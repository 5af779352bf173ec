#pragma once

#include <stdexcept>
#include <string>

namespace hegd {

// Base class for all library failures.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// A precondition or API contract was violated by the caller.
class ContractError : public Error {
 public:
  explicit ContractError(const std::string& what) : Error(what) {}
};

// Two ciphertexts (or a ciphertext and plaintext) sit at different levels;
// the caller must mod-switch before combining them.
class AlignmentError : public ContractError {
 public:
  explicit AlignmentError(const std::string& what) : ContractError(what) {}
};

// Operand scales differ by more than the allowed relative tolerance.
class ScaleError : public ContractError {
 public:
  explicit ScaleError(const std::string& what) : ContractError(what) {}
};

// The modulus chain has no level left for the requested operation.
class DepthExhausted : public Error {
 public:
  explicit DepthExhausted(const std::string& what) : Error(what) {}
};

// File or stream I/O failure, including malformed serialized data.
class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(what) {}
};

}  // namespace hegd
