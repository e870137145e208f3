#pragma once

#include <stdexcept>
#include <string>

namespace tckls {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Parameters violate the model's admissibility constraints.
class ModelError : public Error {
 public:
  using Error::Error;
};

// A point lies outside the state space (or the formula's domain).
class DomainError : public Error {
 public:
  using Error::Error;
};

class NotErgodicError : public Error {
 public:
  using Error::Error;
};

// A consumer asked for a Q/M exponent that was never computed.
class MissingStatisticError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public Error {
 public:
  using Error::Error;
};

// Malformed user input: config files, CSV, JSON, flags.
class InputError : public Error {
 public:
  using Error::Error;
};

}  // namespace tckls
