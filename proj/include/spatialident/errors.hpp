#pragma once

#include <stdexcept>
#include <string>

namespace spatialident {

/// Base class for all library errors. `code()` is a stable machine-readable
/// tag suitable for structured error output.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& msg)
        : std::runtime_error(msg), code_(std::move(code)) {}
    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

/// Invalid or out-of-domain input (bad parameter range, malformed matrix, ...).
class DomainError : public Error {
public:
    explicit DomainError(const std::string& msg) : Error("domain_error", msg) {}
};

/// A proximity matrix row summed to zero, so the degree scaling is undefined.
class ZeroDegreeError : public Error {
public:
    explicit ZeroDegreeError(const std::string& msg) : Error("zero_degree", msg) {}
};

/// A matrix required to be positive definite failed the check.
class NotPositiveDefiniteError : public Error {
public:
    explicit NotPositiveDefiniteError(const std::string& msg)
        : Error("not_positive_definite", msg) {}
};

/// Two parameters that must differ were equal (e.g. crossing search with
/// identical ranges).
class DuplicateParameterError : public Error {
public:
    explicit DuplicateParameterError(const std::string& msg)
        : Error("duplicate_parameter", msg) {}
};

/// An iterative routine exhausted its iteration budget.
class ConvergenceError : public Error {
public:
    explicit ConvergenceError(const std::string& msg) : Error("convergence_failure", msg) {}
};

/// A forge construction was asked for a tuning value outside its valid region.
class InvalidRegionError : public Error {
public:
    explicit InvalidRegionError(const std::string& msg) : Error("invalid_region", msg) {}
};

/// A forge construction's degeneracy precondition does not hold for the
/// supplied parameters.
class CaseNotApplicableError : public Error {
public:
    explicit CaseNotApplicableError(const std::string& msg)
        : Error("case_not_applicable", msg) {}
};

/// The alternative-intercept grid search found no admissible candidate.
class NoValidBetaFoundError : public Error {
public:
    explicit NoValidBetaFoundError(const std::string& msg)
        : Error("no_valid_beta", msg) {}
};

/// Every optimizer start failed (non-finite objective or no progress).
class AllStartsFailedError : public Error {
public:
    explicit AllStartsFailedError(const std::string& msg)
        : Error("all_starts_failed", msg) {}
};

} // namespace spatialident
