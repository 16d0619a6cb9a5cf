#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace agestruct {

/// The requested time step cannot satisfy a scheme solvability constraint.
/// Carries a suggested smaller age step that would restore it.
class StepSizeError : public std::runtime_error {
public:
    StepSizeError(const std::string& msg, double suggested_da)
        : std::runtime_error(msg), suggested_da_(suggested_da) {}
    double suggested_da() const { return suggested_da_; }

private:
    double suggested_da_;
};

/// The characteristic equation has no root in the admissible half line.
class NoRootError : public std::runtime_error {
public:
    NoRootError(const std::string& msg, double g_at_lower)
        : std::runtime_error(msg), g_at_lower_(g_at_lower) {}
    double g_at_lower() const { return g_at_lower_; }

private:
    double g_at_lower_;
};

/// Fixed-point iteration gaps grew for several consecutive sweeps.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(const std::string& msg, std::vector<double> gaps)
        : std::runtime_error(msg), gaps_(std::move(gaps)) {}
    const std::vector<double>& gaps() const { return gaps_; }

private:
    std::vector<double> gaps_;
};

/// Configuration document violates the schema. Carries a JSON-pointer-like
/// path to the offending entry.
class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& path, const std::string& msg)
        : std::runtime_error(path + ": " + msg), path_(path) {}
    const std::string& path() const { return path_; }

private:
    std::string path_;
};

} // namespace agestruct
