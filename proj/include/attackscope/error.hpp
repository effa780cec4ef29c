#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace attackscope {

// Base for every error raised by the library. `module()` names the component
// that rejected the input so the CLI can report it in its error JSON.
class Error : public std::runtime_error {
 public:
  Error(std::string module, const std::string& what)
      : std::runtime_error(what), module_(std::move(module)) {}

  const std::string& module() const noexcept { return module_; }
  virtual const char* kind() const noexcept { return "error"; }

 private:
  std::string module_;
};

// Malformed text input. `line()` is 1-based, 0 when not applicable.
class ParseError : public Error {
 public:
  ParseError(std::string module, const std::string& what, std::size_t line = 0)
      : Error(std::move(module),
              line ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }
  const char* kind() const noexcept override { return "parse_error"; }

 private:
  std::size_t line_;
};

// Input is well-formed but violates a precondition or type invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "validation_error"; }
};

// Mathematical domain violation (negative radicand, value outside [0, 1], ...).
class DomainError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "domain_error"; }
};

// Least-squares fit could not be formed.
class FitError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "fit_error"; }
};

// A file could not be opened, read or written. `path()` names it.
class IoError : public Error {
 public:
  IoError(std::string module, const std::string& what, std::string path)
      : Error(std::move(module), what + ": " + path), path_(std::move(path)) {}

  const std::string& path() const noexcept { return path_; }
  const char* kind() const noexcept override { return "io_error"; }

 private:
  std::string path_;
};

// An output was requested whose prerequisite analysis has not been run.
class MissingAnalysis : public Error {
 public:
  MissingAnalysis(std::string module, const std::string& what,
                  std::string prerequisite)
      : Error(std::move(module), what), prerequisite_(std::move(prerequisite)) {}

  const std::string& prerequisite() const noexcept { return prerequisite_; }
  const char* kind() const noexcept override { return "missing_analysis"; }

 private:
  std::string prerequisite_;
};

}  // namespace attackscope
