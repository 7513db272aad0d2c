#pragma once

#include <stdexcept>
#include <string>

namespace archloop {

// Base of every error the library throws. Callers that only care about
// "something in the pipeline failed" catch this.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class OversizeInput : public Error {
 public:
  using Error::Error;
};

class IncompatibleSignature : public Error {
 public:
  using Error::Error;
};

class DuplicateId : public Error {
 public:
  using Error::Error;
};

class SignatureMismatch : public Error {
 public:
  using Error::Error;
};

class ConversionError : public Error {
 public:
  using Error::Error;
};

class CorpusIoError : public Error {
 public:
  using Error::Error;
};

class SnapshotError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class InvalidReport : public Error {
 public:
  using Error::Error;
};

// Sidecar could not be reached or timed out.
class EvaluatorUnavailable : public Error {
 public:
  using Error::Error;
};

// Peer answered with an unknown protocol version or a malformed message.
// Not retried.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

// The candidate itself raised during training (reported by the evaluator).
class RuntimeFailure : public Error {
 public:
  using Error::Error;
};

class GenerationError : public Error {
 public:
  using Error::Error;
};

class UndefinedInterval : public Error {
 public:
  using Error::Error;
};

class InsufficientData : public Error {
 public:
  using Error::Error;
};

class EmptyCycle : public Error {
 public:
  using Error::Error;
};

class UnknownFormat : public Error {
 public:
  using Error::Error;
};

}  // namespace archloop
