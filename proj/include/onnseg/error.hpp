#pragma once

#include <stdexcept>
#include <string>

namespace onnseg {

/// Shape or channel-count incompatibility between tensors.
class DimensionError : public std::runtime_error {
public:
    explicit DimensionError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Input violates an operation's documented contract (range, binarity, scalarness).
class ContractError : public std::runtime_error {
public:
    explicit ContractError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Invalid configuration (tile grid too large, k > |ids|, Q=0, ...).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Structured data failed validation (duplicate ids, header invariants, weights).
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed file content (bad magic, unsupported datatype, truncation).
class FormatError : public std::runtime_error {
public:
    explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Filesystem-level failure (missing file, unwritable path).
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Out-of-range index access (slice z, etc).
class IndexError : public std::runtime_error {
public:
    explicit IndexError(const std::string& msg) : std::runtime_error(msg) {}
};

/// A closure expected to be deterministic produced two different values.
class DeterminismError : public std::runtime_error {
public:
    explicit DeterminismError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Train-mode batch statistics requested over fewer than two elements.
class DegenerateStatisticsError : public std::runtime_error {
public:
    explicit DegenerateStatisticsError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace onnseg
