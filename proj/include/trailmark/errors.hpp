#pragma once

#include <stdexcept>
#include <string>

namespace trailmark {

// Configuration problems (bad config/scene file, bad flag values). CLI exit code 2.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
    ConfigError(const std::string& file, int line, const std::string& msg)
        : std::runtime_error(file + ":" + std::to_string(line) + ": " + msg) {}
};

// Data problems (malformed or inconsistent inputs). CLI exit code 3.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ParseError : public DataError {
public:
    ParseError(const std::string& file, int line, const std::string& msg)
        : DataError(file + ":" + std::to_string(line) + ": " + msg) {}
};

class MissingFileError : public DataError {
public:
    explicit MissingFileError(const std::string& path)
        : DataError("missing file: " + path) {}
};

// Timestamp ordering or frame-id uniqueness violations in a manifest.
class OrderViolationError : public DataError {
public:
    using DataError::DataError;
};

class InsufficientPosesError : public DataError {
public:
    using DataError::DataError;
};

class OutOfRangeError : public DataError {
public:
    using DataError::DataError;
};

class EmptyDatasetError : public DataError {
public:
    using DataError::DataError;
};

class AllMasksEmptyError : public DataError {
public:
    using DataError::DataError;
};

class DegenerateLabelsError : public DataError {
public:
    using DataError::DataError;
};

class NoLabeledPixelsError : public DataError {
public:
    using DataError::DataError;
};

class PathTooShortError : public DataError {
public:
    using DataError::DataError;
};

// API misuse; indicates a bug in the caller. CLI exit code 4.
class DimensionMismatchError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

class DegeneratePointError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

}  // namespace trailmark
