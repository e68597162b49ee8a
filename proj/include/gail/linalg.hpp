#pragma once

#include <Eigen/Dense>

#include <cstddef>

namespace gail {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Total variation distance between two distributions on a finite space.
inline double tv_distance(const Vector& p, const Vector& q) { return 0.5 * (p - q).lpNorm<1>(); }

/// Flat index of a state-action pair; pairs are ordered state-major.
inline Eigen::Index pair_index(Eigen::Index s, Eigen::Index a, Eigen::Index n_actions) {
    return s * n_actions + a;
}

}  // namespace gail
