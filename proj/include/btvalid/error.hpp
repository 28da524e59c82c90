#pragma once

#include <stdexcept>
#include <string>

namespace btvalid {

/// Base for every error the toolkit raises on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration or CLI input; surfaces as exit code 1.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Bad or unreadable input data.
class DataError : public Error {
 public:
  using Error::Error;
};

}  // namespace btvalid
