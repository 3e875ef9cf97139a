#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace pwsc {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Raised for inconsistent dimensions between fields, controllers and states.
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

}  // namespace pwsc
