#ifndef HISTSEM_ERROR_HPP_
#define HISTSEM_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace histsem {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input, invalid configuration or a violated precondition.
class InputError : public Error {
 public:
  using Error::Error;
};

// Filesystem or subprocess failure.
class IoError : public Error {
 public:
  using Error::Error;
};

// Two inputs that must line up (usage ids, matrix layouts, model dimensions)
// do not.
class MismatchError : public Error {
 public:
  using Error::Error;
};

}  // namespace histsem

#endif  // HISTSEM_ERROR_HPP_
