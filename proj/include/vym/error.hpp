#pragma once

#include <stdexcept>
#include <string>

namespace vym {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor/layer shape contract violated.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Bad input data: manifests, images, ids, configuration values.
class DataError : public Error {
 public:
  enum class Kind {
    kMalformed,
    kMissingFile,
    kDuplicateExample,
    kIncompleteExample,
    kNegativeWeight,
    kInvalidArgument,
    kIo,
  };

  DataError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

/// Non-finite loss or other numerical breakdown during training.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace vym
