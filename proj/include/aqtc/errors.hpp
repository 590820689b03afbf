#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace aqtc {

// Root of every error the library throws. `kind()` is the short module error
// name the CLI prints in front of the message.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(kind + ": " + message), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

// Bad input data or files on disk (CLI exit code 1).
class DataError : public Error {
 public:
  using Error::Error;
};

// Configuration, shape, or argument errors (CLI exit code 2 when they come
// from flags, 1 otherwise).
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& message) : Error("ConfigError", message) {}
};

// Non-finite values during training or inference (CLI exit code 3).
class NumericError : public Error {
 public:
  using Error::Error;
};

class MissingFile : public DataError {
 public:
  explicit MissingFile(const std::string& file) : DataError("MissingFile", file), file_(file) {}
  const std::string& file() const noexcept { return file_; }

 private:
  std::string file_;
};

class SchemaError : public DataError {
 public:
  explicit SchemaError(const std::string& message) : DataError("SchemaError", message) {}
};

class ValidationError : public DataError {
 public:
  explicit ValidationError(std::vector<std::string> violations)
      : DataError("ValidationError", join(violations)), violations_(std::move(violations)) {}
  const std::vector<std::string>& violations() const noexcept { return violations_; }

 private:
  static std::string join(const std::vector<std::string>& v) {
    std::string out;
    for (const auto& s : v) {
      if (!out.empty()) out += "; ";
      out += s;
    }
    return out;
  }
  std::vector<std::string> violations_;
};

class IoError : public DataError {
 public:
  explicit IoError(const std::string& message) : DataError("IoError", message) {}
};

class CorruptCache : public DataError {
 public:
  explicit CorruptCache(const std::string& message) : DataError("CorruptCache", message) {}
};

class MissingCache : public DataError {
 public:
  explicit MissingCache(const std::string& message) : DataError("MissingCache", message) {}
};

class InsufficientTasks : public DataError {
 public:
  explicit InsufficientTasks(const std::string& message) : DataError("InsufficientTasks", message) {}
};

class EmptyVideo : public DataError {
 public:
  explicit EmptyVideo(const std::string& message) : DataError("EmptyVideo", message) {}
};

class EmptyText : public DataError {
 public:
  explicit EmptyText(const std::string& message) : DataError("EmptyText", message) {}
};

class ButtonNotOnImage : public DataError {
 public:
  explicit ButtonNotOnImage(const std::string& message) : DataError("ButtonNotOnImage", message) {}
};

class UnknownQA : public DataError {
 public:
  explicit UnknownQA(const std::string& qa_id) : DataError("UnknownQA", qa_id) {}
};

class EmptyEval : public DataError {
 public:
  explicit EmptyEval(const std::string& message) : DataError("EmptyEval", message) {}
};

class DimensionMismatch : public Error {
 public:
  explicit DimensionMismatch(const std::string& message) : Error("DimensionMismatch", message) {}
};

class RangeError : public Error {
 public:
  explicit RangeError(const std::string& message) : Error("RangeError", message) {}
};

class IndexError : public Error {
 public:
  explicit IndexError(const std::string& message) : Error("IndexError", message) {}
};

class NonFiniteLoss : public NumericError {
 public:
  NonFiniteLoss(int epoch, int batch)
      : NumericError("NonFiniteLoss", "epoch " + std::to_string(epoch) + " batch " + std::to_string(batch)),
        batch_(batch) {}
  int batch() const noexcept { return batch_; }

 private:
  int batch_;
};

}  // namespace aqtc
