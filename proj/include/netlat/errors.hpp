#pragma once

#include <stdexcept>
#include <string>

namespace netlat {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// malformed input bytes (JSON syntax, wrong types, missing keys)
struct ParseError : Error {
  using Error::Error;
};

// well-formed input violating a documented invariant; message names it
struct ValidationError : Error {
  using Error::Error;
};

// next-hop walk revisited a node
struct RoutingLoopError : Error {
  using Error::Error;
};

// a used link has utilization >= 1; message names the link
struct UnstableLinkError : Error {
  using Error::Error;
};

// incompatible tensor shapes; message carries both shapes
struct ShapeError : Error {
  using Error::Error;
};

// checkpoint config_hash does not match the requested config
struct ConfigMismatchError : Error {
  using Error::Error;
};

// training loss became non-finite
struct DivergenceError : Error {
  using Error::Error;
};

}  // namespace netlat
