#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace stm {

/// Malformed input row. Carries the 1-based line number of the offending row.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& file, std::size_t line, const std::string& what)
        : std::runtime_error(file + ":" + std::to_string(line) + ": " + what),
          file_(file), line_(line) {}

    const std::string& file() const noexcept { return file_; }
    std::size_t line() const noexcept { return line_; }

private:
    std::string file_;
    std::size_t line_;
};

/// Inputs that parse individually but disagree with each other.
class SchemaError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Missing or unreadable file.
class FileError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Training aborted (non-finite objective, divergence).
class TrainingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace stm
