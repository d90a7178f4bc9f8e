#pragma once

#include <stdexcept>
#include <string>

namespace koopeq {

/// Failure categories shared by every module. The CLI maps these onto exit codes.
enum class ErrorKind {
    invalid_input,
    index,
    precondition,
    dimension_mismatch,
    empty_data,
    degenerate_data,
    divergence,
    io,
    config,
};

inline const char* to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::invalid_input: return "invalid input";
    case ErrorKind::index: return "index out of range";
    case ErrorKind::precondition: return "precondition violated";
    case ErrorKind::dimension_mismatch: return "dimension mismatch";
    case ErrorKind::empty_data: return "empty data";
    case ErrorKind::degenerate_data: return "degenerate data";
    case ErrorKind::divergence: return "numerical divergence";
    case ErrorKind::io: return "i/o error";
    case ErrorKind::config: return "configuration error";
    }
    return "unknown error";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

/// Raised when a state leaves the finite/bounded region. `where` is either a
/// simulation time or a rollout step, depending on the producer.
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& what, double where)
        : Error(ErrorKind::divergence, what), where_(where) {}

    double where() const noexcept { return where_; }

private:
    double where_;
};

/// Magnitude above which any state value is treated as blown up.
inline constexpr double kDivergenceThreshold = 1e6;

inline void require(bool condition, ErrorKind kind, const std::string& what) {
    if (!condition) throw Error(kind, what);
}

}  // namespace koopeq
