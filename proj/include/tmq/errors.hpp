#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tmq {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file; `line` is 1-based, 0 when not line-specific.
class ParseError : public Error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : Error(source + (line ? ":" + std::to_string(line) : std::string()) + ": " + what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class OutOfVocabulary : public Error {
 public:
  explicit OutOfVocabulary(const std::string& word)
      : Error("out-of-vocabulary word: '" + word + "'"), word_(word) {}
  const std::string& word() const noexcept { return word_; }

 private:
  std::string word_;
};

/// No modification operator could produce a new instance.
class SynthesisStarvation : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class NotFound : public Error {
 public:
  using Error::Error;
};

/// A second, different answer for something already resolved.
class Conflict : public Error {
 public:
  using Error::Error;
};

}  // namespace tmq
