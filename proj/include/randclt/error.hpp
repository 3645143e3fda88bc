#ifndef RANDCLT_ERROR_HPP
#define RANDCLT_ERROR_HPP

#include <stdexcept>
#include <string>

namespace randclt {

/// Bad dimension, malformed system parameters, out-of-domain arguments.
class invalid_parameter : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A quadrature or root finder did not reach its tolerance.
class numeric_failure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The requested evaluation mode does not exist for this system
/// (e.g. exact enumeration on a continuous sample space).
class unsupported_mode : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// The inner budget cannot certify the requested accuracy.
class budget_error : public std::runtime_error {
public:
    budget_error(const std::string& what, std::size_t required)
        : std::runtime_error(what), required_(required) {}

    std::size_t required_budget() const noexcept { return required_; }

private:
    std::size_t required_;
};

} // namespace randclt

#endif
