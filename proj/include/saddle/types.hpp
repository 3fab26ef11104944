#pragma once

#include <Eigen/Core>

namespace saddle {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

} // namespace saddle
