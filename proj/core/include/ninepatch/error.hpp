#pragma once

#include <stdexcept>
#include <string>

namespace ninepatch {

/// Base class of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidInput : public Error {
public:
    using Error::Error;
};

class OutOfBounds : public Error {
public:
    using Error::Error;
};

/// Dimension mismatch between a network and its input or targets.
class ShapeError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

/// Unreadable or inconsistent input data (manifests, images, model files).
class DataError : public Error {
public:
    using Error::Error;
};

class UnknownLabel : public Error {
public:
    explicit UnknownLabel(std::string label)
        : Error("unknown age label: '" + label + "'"), label_(std::move(label)) {}

    const std::string& label() const noexcept { return label_; }

private:
    std::string label_;
};

/// Raised when the loss or any parameter becomes non-finite during training.
class TrainingDiverged : public Error {
public:
    using Error::Error;
};

}  // namespace ninepatch
