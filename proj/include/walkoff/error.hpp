#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace walkoff {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Malformed input line. `line` is 1-based; 0 when the source has no lines.
struct ParseError : Error {
    ParseError(std::size_t at, const std::string& what)
        : Error("line " + std::to_string(at) + ": " + what), line(at) {}
    std::size_t line;
};

/// Record-order violation, e.g. a `play` record before any `id`.
struct StructureError : ParseError {
    using ParseError::ParseError;
};

/// Inconsistent play sequence. `line` is the play's source line, 0 if unknown.
struct ReplayError : Error {
    ReplayError(std::string game, std::size_t index, const std::string& what, std::size_t at = 0)
        : Error(game + " play " + std::to_string(index) +
                (at ? " (line " + std::to_string(at) + ")" : std::string()) + ": " + what),
          game_id(std::move(game)), play_index(index), line(at) {}
    std::string game_id;
    std::size_t play_index;
    std::size_t line;
};

struct SchemaError : Error {
    using Error::Error;
};

struct ValidationError : Error {
    using Error::Error;
};

struct SingularMatrixError : Error {
    using Error::Error;
};

struct ConvergenceError : Error {
    using Error::Error;
};

/// Failure inside the estimation pipeline (zero cells, everything trimmed, ...).
struct PipelineError : Error {
    using Error::Error;
};

} // namespace walkoff
