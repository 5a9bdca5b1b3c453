#ifndef ADVSR_ERROR_H_
#define ADVSR_ERROR_H_

#include <stdexcept>
#include <string>

namespace advsr {

// Root of every error thrown by the library. Subclasses name the failure
// class so callers (the harness in particular) can react selectively.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Malformed container (bad RIFF header, truncated checkpoint, ...).
class FormatError : public Error {
 public:
  using Error::Error;
};

// Well-formed but outside what we read (stereo WAV, 24-bit PCM, ...).
class UnsupportedFormatError : public FormatError {
 public:
  using FormatError::FormatError;
};

// Mathematically undefined input: zero-energy signal, empty reference, ...
class DomainError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

// A value went non-finite.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Caller broke an API precondition.
class ContractError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// CTC label needs more frames than the utterance has.
class InfeasibleLabelError : public Error {
 public:
  using Error::Error;
};

class InfeasibleTargetError : public InfeasibleLabelError {
 public:
  using InfeasibleLabelError::InfeasibleLabelError;
};

class TrainingError : public Error {
 public:
  TrainingError(const std::string& what, long step)
      : Error(what + " (step " + std::to_string(step) + ")"), step_(step) {}
  long step() const { return step_; }

 private:
  long step_;
};

class PlanError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, long line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  long line() const { return line_; }

 private:
  long line_;
};

}  // namespace advsr

#endif  // ADVSR_ERROR_H_
