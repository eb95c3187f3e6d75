#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pmcts {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Broken tree topology: unknown node id, selection on a leaf.
class StructuralError : public Error {
public:
    using Error::Error;
};

/// Attempt to add a child under a terminal node.
class IllegalExpansionError : public Error {
public:
    using Error::Error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
public:
    using Error::Error;
};

/// No visited terminal node exists in the tree.
class NoSolutionError : public Error {
public:
    using Error::Error;
};

/// Backend unreachable or answered with a non-2xx status after retries.
class TransportError : public Error {
public:
    TransportError(const std::string& what, int status) : Error(what), status_(status) {}
    /// HTTP status of the last attempt, 0 when no response was received.
    int status() const noexcept { return status_; }

private:
    int status_;
};

/// Backend answered with a body that does not follow the wire protocol.
class ProtocolError : public Error {
public:
    using Error::Error;
};

/// Scripted model received a prompt that no script entry matches.
class ScriptMissError : public Error {
public:
    using Error::Error;
};

/// Model output could not be parsed into the expected shape.
class ParseError : public Error {
public:
    using Error::Error;
};

/// No usable answer after the answer marker.
class ExtractionError : public Error {
public:
    using Error::Error;
};

/// Malformed dataset input. line() is 1-based, 0 when not line-specific.
class DatasetError : public Error {
public:
    DatasetError(const std::string& what, std::size_t line) : Error(what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class SpecError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class TemplateError : public Error {
public:
    using Error::Error;
};

/// Search stopped by a model failure. Carries the tree export at the time of failure.
class SearchAbortedError : public Error {
public:
    SearchAbortedError(const std::string& what, std::string partial_trace)
        : Error(what), partial_trace_(std::move(partial_trace)) {}
    const std::string& partial_trace() const noexcept { return partial_trace_; }

private:
    std::string partial_trace_;
};

}  // namespace pmcts
