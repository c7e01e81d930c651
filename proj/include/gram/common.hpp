#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace gram {

// Shape/dimension violations: message names the offending shapes.
class ShapeError : public std::runtime_error {
public:
    explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Violated operation precondition (empty document, non-scalar loss, ...).
class ContractError : public std::runtime_error {
public:
    explicit ContractError(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid configuration; message names the field.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor allocation would exceed the configured memory budget.
class MemoryLimitError : public std::runtime_error {
public:
    explicit MemoryLimitError(const std::string& msg) : std::runtime_error(msg) {}
};

// Training produced a non-finite loss.
class TrainDivergence : public std::runtime_error {
public:
    explicit TrainDivergence(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace gram
