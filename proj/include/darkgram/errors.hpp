#pragma once

#include <stdexcept>
#include <string>

namespace darkgram {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad user input: malformed files, invalid records, bad arguments.
class InputError : public Error {
 public:
  using Error::Error;
};

/// Missing environment: unreadable data files, unset credentials.
class EnvironmentError : public Error {
 public:
  using Error::Error;
};

/// A remote dependency failed in a way that may succeed on retry.
class TransientError : public Error {
 public:
  using Error::Error;
};

/// A remote dependency failed in a way that will not recover on retry.
class PermanentError : public Error {
 public:
  using Error::Error;
};

/// The channel (or post) no longer exists on the platform.
class DeletedError : public PermanentError {
 public:
  using PermanentError::PermanentError;
};

}  // namespace darkgram
