#pragma once

#include <stdexcept>
#include <string>

namespace megadance {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shape / contract failures inside numeric code.
class DimensionError : public Error { using Error::Error; };
class ContractError : public Error { using Error::Error; };
class DegenerateMaskError : public Error { using Error::Error; };
class DegeneracyError : public Error { using Error::Error; };
class LengthError : public Error { using Error::Error; };
class PaddingError : public Error { using Error::Error; };
class RangeError : public Error { using Error::Error; };

// Pipeline level failures. The CLI maps these onto exit codes.
class ConfigError : public Error { using Error::Error; };
class ParseError : public Error { using Error::Error; };
class ValidationError : public Error { using Error::Error; };
class RoutingError : public Error { using Error::Error; };
class InputError : public Error { using Error::Error; };
class DependencyError : public Error { using Error::Error; };
class IoError : public Error { using Error::Error; };

}  // namespace megadance
