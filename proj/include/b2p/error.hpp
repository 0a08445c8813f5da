#pragma once

#include <stdexcept>
#include <string>

namespace b2p {

// Base for every error thrown by the library. Subclasses name the failure
// class so the CLI can map them onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FormatError : public Error { using Error::Error; };
class ChecksumError : public FormatError { using FormatError::FormatError; };
class RangeError : public Error { using Error::Error; };
class ConfigError : public Error { using Error::Error; };
class MissingInputError : public Error { using Error::Error; };
class ConsistencyError : public Error { using Error::Error; };
class DimensionError : public Error { using Error::Error; };
class NumericError : public Error { using Error::Error; };
class ContractError : public Error { using Error::Error; };
class IncompatibleError : public Error { using Error::Error; };
class LevelUnavailableError : public Error { using Error::Error; };

class TruncationError : public Error {
 public:
  TruncationError(const std::string& what, int level) : Error(what), level_(level) {}
  int level() const { return level_; }

 private:
  int level_;
};

}  // namespace b2p
