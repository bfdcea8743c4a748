// error.hpp - exception types shared by every concentra module.
//
// The CLI maps InputError to exit code 2; InternalError and ResourceError
// propagate as failures of the run itself.

#pragma once

#include <stdexcept>
#include <string>

namespace concentra {

// Caller supplied something outside an operation's preconditions.
class InputError : public std::invalid_argument {
 public:
  explicit InputError(const std::string& what) : std::invalid_argument(what) {}
};

// A solver failed to converge or produced an inconsistent result.
class InternalError : public std::runtime_error {
 public:
  explicit InternalError(const std::string& what) : std::runtime_error(what) {}
};

// A computation would exceed its configured memory or atom budget.
class ResourceError : public std::runtime_error {
 public:
  explicit ResourceError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace concentra
