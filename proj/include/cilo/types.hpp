#pragma once

#include <Eigen/Core>

namespace cilo {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

}  // namespace cilo
