#pragma once

#include <stdexcept>

namespace mova {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad arguments or violated preconditions.
class UsageError : public Error {
 public:
  using Error::Error;
};

// Malformed model output or unreadable file content.
class ParseError : public Error {
 public:
  using Error::Error;
};

// Network-level failure; retried by Client up to the policy limit.
class TransportError : public Error {
 public:
  using Error::Error;
};

// Missing or rejected credentials; never retried.
class AuthError : public Error {
 public:
  using Error::Error;
};

}  // namespace mova
