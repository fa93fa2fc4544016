#pragma once

#include <stdexcept>

namespace eenas {

/// Invalid configuration value (macro, weights, search settings).
class ConfigError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// File could not be read or written, or its contents are corrupt.
class IoError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

} // namespace eenas
