#pragma once

#include <stdexcept>
#include <string>

namespace kcontrol {

/// Base class for every error raised by the library.
///
/// `kind()` is a stable, machine-parsable error class. The CLI prints it as
/// the first token of its one-line error report.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& what)
        : std::runtime_error(what), kind_(std::move(kind)) {}

    [[nodiscard]] const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

/// Bad argument: dimension mismatch, out-of-range index, non-finite input.
class InputError : public Error {
public:
    explicit InputError(const std::string& what) : Error("input_error", what) {}
};

/// Malformed external data: missing CSV column, non-binary label.
class SchemaError : public Error {
public:
    explicit SchemaError(const std::string& what) : Error("schema_error", what) {}
};

/// Invalid experiment or engine configuration.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error("config_error", what) {}
};

/// The forward state left the finite range during propagation.
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& what, long step)
        : Error("divergence_error", what), step_(step) {}

    [[nodiscard]] long step() const noexcept { return step_; }

private:
    long step_;
};

/// An optimizer run failed; carries the iteration at which it happened.
class FittingError : public Error {
public:
    FittingError(const std::string& what, long iteration)
        : Error("fitting_error", what), iteration_(iteration) {}

    [[nodiscard]] long iteration() const noexcept { return iteration_; }

private:
    long iteration_;
};

/// Filesystem or persistence failure.
class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error("io_error", what) {}
};

namespace detail {

inline void require(bool condition, const std::string& message) {
    if (!condition) {
        throw InputError(message);
    }
}

}  // namespace detail

}  // namespace kcontrol
