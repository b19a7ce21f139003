#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace airsvr {

// Root of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Caller supplied malformed arguments (shape mismatch, out-of-range value).
class InputError : public Error {
public:
    using Error::Error;
};

// A preprocessing step could not be fit or applied.
class PipelineError : public Error {
public:
    using Error::Error;
};

// Metric undefined for the given data (e.g. constant y_true).
class MetricError : public Error {
public:
    using Error::Error;
};

// Every trial of a hyperparameter search failed.
class SearchError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

// CSV header does not match the requested dataset schema.
class SchemaError : public Error {
public:
    using Error::Error;
};

// A text input could not be parsed. Line is 1-based; 0 when not line oriented.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line = 0, std::string field = {})
        : Error(what), line_(line), field_(std::move(field)) {}

    std::size_t line() const noexcept { return line_; }
    const std::string& field() const noexcept { return field_; }

private:
    std::size_t line_;
    std::string field_;
};

// Model file carries a format_version this build cannot read.
class VersionError : public Error {
public:
    VersionError(const std::string& what, int found) : Error(what), found_(found) {}
    int found() const noexcept { return found_; }

private:
    int found_;
};

}  // namespace airsvr
