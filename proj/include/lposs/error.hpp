// error.hpp
#ifndef LPOSS_ERROR_HPP
#define LPOSS_ERROR_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lposs {

// Invalid arguments, shape mismatches and out-of-range configuration.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// An iterative solve did not reach its tolerance.
class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, std::size_t iterations, double residual)
        : std::runtime_error(what + " (iterations=" + std::to_string(iterations) +
                             ", residual=" + std::to_string(residual) + ")"),
          iterations_(iterations),
          residual_(residual) {}

    std::size_t iterations() const noexcept { return iterations_; }
    double residual() const noexcept { return residual_; }

private:
    std::size_t iterations_;
    double residual_;
};

} // namespace lposs

#endif // LPOSS_ERROR_HPP
