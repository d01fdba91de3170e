#pragma once

#include <stdexcept>
#include <string>

namespace disko {

// Bad user-supplied configuration, file contents, or dimensions.
struct config_error : std::runtime_error {
  explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

// A numerical procedure failed (non-convergence, inadmissible spectrum, ...).
struct numerical_error : std::runtime_error {
  explicit numerical_error(const std::string& what) : std::runtime_error(what) {}
};

// Matrix logarithm does not exist for the requested operator; callers should
// switch to the discrete-time path.
struct log_inadmissible_error : numerical_error {
  explicit log_inadmissible_error(const std::string& what) : numerical_error(what) {}
};

// Requested Lyapunov solve has no positive-definite solution.
struct not_hurwitz_error : numerical_error {
  explicit not_hurwitz_error(const std::string& what) : numerical_error(what) {}
};

}  // namespace disko
