#pragma once

#include <stdexcept>
#include <string>

namespace bira {

// Shape/dimension contract violations (mismatched operands, bad geometry).
class ShapeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Value-domain violations (division by exact zero, label out of range, ...).
class DomainError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad or inconsistent configuration (CLI flags, config files, model specs).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Filesystem and serialization failures, always with path context.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace bira
