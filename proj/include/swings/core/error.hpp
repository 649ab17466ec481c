#pragma once

#include <stdexcept>
#include <string>

namespace swings {

// Root of every error this library throws. User-facing tools map
// subclasses to exit codes; anything else is treated as internal.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidParameter : public Error {
 public:
  using Error::Error;
};

// Malformed or truncated bytes on the wire or on disk.
class FormatError : public Error {
 public:
  using Error::Error;
};

class StateError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Peer violated the slice/slot protocol (player side).
class ProtocolError : public Error {
 public:
  using Error::Error;
};

// Internal invariant broken; indicates a bug rather than bad input.
class ConsistencyError : public Error {
 public:
  using Error::Error;
};

}  // namespace swings
