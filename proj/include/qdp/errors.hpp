#pragma once

#include <cstddef>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

namespace qdp {

/// A model returned something that breaks its contract (e.g. a kernel row that is not a pmf).
class ModelContractError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Operation undefined at the given input (boundary policies, ξ(1)=1 label shift, ...).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// The model does not provide μ-partials but the operation needs them.
class UnsupportedModelError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Non-finite values showed up in a numerical recursion.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid configuration. `keys` lists the offending entries.
class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& msg, std::vector<std::string> keys = {})
        : std::runtime_error(msg), keys(std::move(keys)) {}
    std::vector<std::string> keys;
};

/// Refused because the problem is larger than the configured guard.
class ResourceGuardError : public std::length_error {
public:
    ResourceGuardError(const std::string& what, double size, double bound)
        : std::length_error(what + ": size " + fmt(size) + " exceeds bound " + fmt(bound)),
          size(size), bound(bound) {}
    double size;
    double bound;

private:
    static std::string fmt(double v) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.6g", v);
        return buf;
    }
};

} // namespace qdp
