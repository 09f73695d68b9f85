#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace dbn {

/// Error categories. The CLI maps each one to a stable exit code.
enum class ErrorKind {
    dimension,
    cycle,
    range,
    domain,
    model,
    data,
    size,
    optimizer,
    split,
    schema,
    io,
    usage,
    timeout,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

/// Raised by topological_order; carries one offending cycle (node indices, closed implicitly).
class CycleError : public Error {
public:
    CycleError(std::vector<std::size_t> cycle, const std::string& what)
        : Error(ErrorKind::cycle, what), cycle_(std::move(cycle)) {}
    const std::vector<std::size_t>& cycle() const noexcept { return cycle_; }

private:
    std::vector<std::size_t> cycle_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace dbn
