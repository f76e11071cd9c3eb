#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace regul {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using CVec = Eigen::VectorXcd;

/// Raised when a scenario/design references something that does not exist
/// or is missing a field its variant requires.
struct config_error : std::runtime_error {
    explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

/// Raised when a supplied design object violates one of its construction
/// probes (e.g. a coupling function failing its positivity condition).
struct design_error : std::runtime_error {
    explicit design_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace regul
