#pragma once

#include <stdexcept>
#include <string>

namespace kgrec {

// Base for every error raised by the library. The category maps onto the
// CLI exit codes (config 2, data 3, numeric 4).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace kgrec
