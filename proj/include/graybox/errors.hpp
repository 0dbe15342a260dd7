#pragma once

#include <stdexcept>
#include <string>

namespace graybox {

/// Invalid configuration value (bad sizes, non-positive constants, unknown mode).
class config_error : public std::runtime_error {
public:
    explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

/// A caller broke an interface contract (mismatched lengths, empty input).
class contract_error : public std::runtime_error {
public:
    explicit contract_error(const std::string& what) : std::runtime_error(what) {}
};

/// Numeric blowup during integration or gradient work. Carries the first
/// offending step index and, when known, the sample index.
class blowup_error : public std::runtime_error {
public:
    blowup_error(const std::string& what, long step, long sample = -1)
        : std::runtime_error(what), step(step), sample(sample) {}

    long step;
    long sample;
};

/// Non-finite value produced outside of trajectory integration.
class numeric_error : public std::runtime_error {
public:
    explicit numeric_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace graybox
