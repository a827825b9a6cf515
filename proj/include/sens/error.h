#ifndef SENS_ERROR_H_
#define SENS_ERROR_H_

#include <stdexcept>
#include <string>

namespace sens {

// Every error carries a short machine-parseable category used by the CLI
// ("dimension", "parameter", "format", "state", "vocabulary", "io",
// "numeric").
class Error : public std::runtime_error {
 public:
  Error(std::string category, const std::string& message)
      : std::runtime_error(message), category_(std::move(category)) {}
  const std::string& category() const { return category_; }

 private:
  std::string category_;
};

class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& m) : Error("dimension", m) {}
};

class ParameterError : public Error {
 public:
  explicit ParameterError(const std::string& m) : Error("parameter", m) {}
};

class FormatError : public Error {
 public:
  explicit FormatError(const std::string& m) : Error("format", m) {}
};

class StateError : public Error {
 public:
  explicit StateError(const std::string& m) : Error("state", m) {}
};

class VocabularyError : public Error {
 public:
  explicit VocabularyError(const std::string& m) : Error("vocabulary", m) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& m) : Error("io", m) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& m) : Error("numeric", m) {}
};

}  // namespace sens

#endif  // SENS_ERROR_H_
