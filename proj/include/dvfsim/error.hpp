#pragma once

#include <stdexcept>
#include <string>

namespace dvfsim {

// Invalid argument to a model or analysis function (out-of-range index,
// missing duration, empty graph, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// A TX DoneFlag arrived for a dependency that was not pending. Always a
// graph or mapping bug, never a recoverable runtime condition.
class ProtocolError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Configuration could not be validated. The message names the field.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dvfsim
