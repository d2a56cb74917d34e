#pragma once

#include <stdexcept>
#include <string>

namespace prefopt {

/// Structural problems: shape mismatches, missing augmentation maps,
/// inconsistent config. Maps to CLI exit code 2.
class config_error : public std::runtime_error {
public:
    explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

/// Non-finite loss or gradient during training. Maps to CLI exit code 3.
class divergence_error : public std::runtime_error {
public:
    divergence_error(const std::string& what, long step) : std::runtime_error(what), step_(step) {}
    long step() const { return step_; }

private:
    long step_;
};

}  // namespace prefopt
