#pragma once

#include <stdexcept>
#include <string>

namespace windtree {

// Invalid user-supplied parameters (probability vectors, configs).
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A precondition on the geometric or index domain was violated.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// An event-count guard tripped (trapped particle, unbounded pack).
class RunawayError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An internal consistency assertion failed during a construction.
class ConstructionError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace windtree
