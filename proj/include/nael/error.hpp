#pragma once

#include <stdexcept>
#include <string>

namespace nael {

// Process exit codes used by the command-line front end.
enum class ExitCode : int {
    ok = 0,
    usage = 2,
    data = 3,
    dependency = 4,
    numeric = 5,
};

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
    virtual ExitCode exit_code() const noexcept { return ExitCode::data; }
};

// A waveform or configuration parameter outside its admissible domain.
class ParameterError : public Error {
public:
    using Error::Error;
    ExitCode exit_code() const noexcept override { return ExitCode::usage; }
};

class ShapeError : public Error {
public:
    using Error::Error;
};

// An operation was requested in a state that does not support it
// (backward before forward, missing intermediates, ...).
class StateError : public Error {
public:
    using Error::Error;
};

class FormatError : public Error {
public:
    FormatError(const std::string& what, std::size_t offset)
        : Error(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}
    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

// A checkpoint whose tensors do not fit the network it is loaded into.
class CompatibilityError : public Error {
public:
    using Error::Error;
};

class DependencyError : public Error {
public:
    using Error::Error;
    ExitCode exit_code() const noexcept override { return ExitCode::dependency; }
};

class NumericError : public Error {
public:
    using Error::Error;
    ExitCode exit_code() const noexcept override { return ExitCode::numeric; }
};

}  // namespace nael
