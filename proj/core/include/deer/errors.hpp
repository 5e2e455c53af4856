#pragma once

#include <stdexcept>
#include <string>

namespace deer {

/// Base class for every error thrown by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Invalid argument or violated precondition (empty probability list, budget
/// of zero, lambda outside (0,1), ...).
struct DomainError : Error {
  using Error::Error;
};

/// Bad or inconsistent configuration. The message names the offending key.
struct ConfigError : Error {
  using Error::Error;
};

/// Network-level failure talking to a completion endpoint. Retryable.
struct TransportError : Error {
  using Error::Error;
};

/// The endpoint answered but the response is unusable (malformed JSON,
/// missing logprobs that were requested, unexpected status). Never retried.
struct ProtocolError : Error {
  using Error::Error;
};

/// Scripted-backend script problems: schema violations, bad probabilities,
/// or a generation request the script has no answer for.
struct ScriptError : Error {
  using Error::Error;
};

/// Dataset / run-record id mismatch during metric computation.
struct AlignmentError : Error {
  using Error::Error;
};

/// Grading was asked to judge a task kind it does not support (code).
struct UnsupportedTaskError : Error {
  using Error::Error;
};

}  // namespace deer
