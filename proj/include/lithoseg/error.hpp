#pragma once

#include <stdexcept>
#include <string>

namespace lithoseg {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// File missing, unreadable, or in a format we do not accept.
class IoError : public Error {
 public:
  using Error::Error;
};

// Dimensions of two inputs disagree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Input violates an operation's precondition (degenerate histogram,
// contour too short, point outside the image, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

}  // namespace lithoseg
