#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace countvqa {

/// Base of every error raised by the library. The CLI maps subclasses to
/// exit codes: DataError -> 2, TransportError -> 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad input data: malformed files, broken references, schema mismatches.
class DataError : public Error {
 public:
  using Error::Error;
};

class ParseError : public DataError {
 public:
  ParseError(const std::string& what, std::size_t byte_offset)
      : DataError(what), byte_offset_(byte_offset) {}
  std::size_t byte_offset() const noexcept { return byte_offset_; }

 private:
  std::size_t byte_offset_;
};

class IntegrityError : public DataError {
 public:
  using DataError::DataError;
};

class SchemaError : public DataError {
 public:
  using DataError::DataError;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A replay log has no entry for the requested question.
class ReplayMiss : public DataError {
 public:
  explicit ReplayMiss(const std::string& question_id)
      : DataError("replay log has no response for question " + question_id),
        question_id_(question_id) {}
  const std::string& question_id() const noexcept { return question_id_; }

 private:
  std::string question_id_;
};

/// Network failure after all retries were spent.
class TransportError : public Error {
 public:
  using Error::Error;
};

/// The endpoint answered with a non-2xx status that is not worth retrying.
class RemoteError : public TransportError {
 public:
  RemoteError(int status, const std::string& message)
      : TransportError("remote error " + std::to_string(status) + ": " + message),
        status_(status),
        message_(message) {}
  int status() const noexcept { return status_; }
  const std::string& message() const noexcept { return message_; }

 private:
  int status_;
  std::string message_;
};

}  // namespace countvqa
