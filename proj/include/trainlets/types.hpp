#pragma once

#include <Eigen/Dense>

namespace trainlets {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

}  // namespace trainlets
