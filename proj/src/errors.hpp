#pragma once

#include <stdexcept>
#include <string>

namespace pgrpo {

// Base for all library errors surfaced through the C API as status codes.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Violated precondition or inconsistent arguments.
class ContractError : public Error {
 public:
  using Error::Error;
};

// File system / stream failures.
class IoError : public Error {
 public:
  using Error::Error;
};

// Malformed serialized data (dataset lines, checkpoints, config JSON).
class FormatError : public Error {
 public:
  using Error::Error;
};

// Non-finite objective or gradient during optimization.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Remote judge transport or protocol failure.
class RemoteError : public Error {
 public:
  using Error::Error;
};

}  // namespace pgrpo
