#include "rml/error.hpp"

#include <utility>

namespace rml {

Error::Error(std::string where, const std::string& what)
    : std::runtime_error(where + ": " + what), where_(std::move(where)) {}

SolverError::SolverError(std::string where, const std::string& what, double residual)
    : NumericError(std::move(where), what + " (residual " + std::to_string(residual) + ")"),
      residual_(residual) {}

}  // namespace rml
