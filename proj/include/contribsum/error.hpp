#pragma once

#include <stdexcept>
#include <string>

namespace contribsum {

/// Base of every error the library throws. Each subsystem derives a
/// narrow type so callers can isolate failures (e.g. per team in the CLI).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public Error {
public:
    using Error::Error;
};

// ingest
class NotARepository : public Error {
public:
    using Error::Error;
};

class BranchNotFound : public Error {
public:
    explicit BranchNotFound(std::string branch)
        : Error("branch not found: " + branch), branch_(std::move(branch)) {}
    const std::string& branch() const noexcept { return branch_; }

private:
    std::string branch_;
};

class UnknownCommit : public Error {
public:
    explicit UnknownCommit(const std::string& hash) : Error("unknown commit: " + hash) {}
};

class CorruptObject : public Error {
public:
    using Error::Error;
};

// identity
class DuplicateAlias : public Error {
public:
    using Error::Error;
};

class MalformedRoster : public Error {
public:
    MalformedRoster(std::size_t line, const std::string& what)
        : Error("roster line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

// metrics
class MalformedNotebook : public Error {
public:
    using Error::Error;
};

// tables
class SchemaMismatch : public Error {
public:
    explicit SchemaMismatch(std::string column)
        : Error("CSV schema mismatch at column: " + column), column_(std::move(column)) {}
    const std::string& column() const noexcept { return column_; }

private:
    std::string column_;
};

class MalformedCsv : public Error {
public:
    MalformedCsv(std::size_t line, const std::string& what)
        : Error("malformed CSV at line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

// agents
class ProviderError : public Error {
public:
    ProviderError(const std::string& what, int attempts)
        : Error(what + " (after " + std::to_string(attempts) + " attempt(s))"), attempts_(attempts) {}
    int attempts() const noexcept { return attempts_; }

private:
    int attempts_;
};

class BudgetExceeded : public Error {
public:
    using Error::Error;
};

class TemplateViolation : public Error {
public:
    using Error::Error;
};

class PreconditionViolation : public Error {
public:
    using Error::Error;
};

// report
class TeamMismatch : public Error {
public:
    using Error::Error;
};

// synthfix
class ScriptError : public Error {
public:
    ScriptError(const std::string& step, const std::string& cause)
        : Error("script step '" + step + "': " + cause), step_(step) {}
    const std::string& step() const noexcept { return step_; }

private:
    std::string step_;
};

// cli
class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace contribsum
