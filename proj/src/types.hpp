#ifndef NPMIX_TYPES_HPP
#define NPMIX_TYPES_HPP

#include <Eigen/Dense>

namespace npmix {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

}  // namespace npmix

#endif
