#pragma once

#include <stdexcept>
#include <string>

namespace sbd {

// Base of every error this library throws. The CLI maps ConfigError to exit
// code 2 and everything else to exit code 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite values or invalid probability vectors.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Misuse of the gradient tape (foreign or stale handles, non-scalar loss).
class GraphError : public Error {
 public:
  using Error::Error;
};

// Sequence positions beyond the model's max_seq_len.
class CapacityError : public Error {
 public:
  using Error::Error;
};

// Attention mask whose shape does not match the forward layout.
class MaskError : public Error {
 public:
  using Error::Error;
};

// KV cache that does not cover the committed prefix it is used with.
class CacheError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Training data ran out before the requested number of steps.
class DataError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace sbd
