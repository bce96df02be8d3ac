// Copyright 2026 The hetgain Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#pragma once

#include <Eigen/Core>
#include <Eigen/QR>

#include <span>

namespace hetgain {

/// Least-squares fit; on rank deficiency the minimum-norm solution.
struct LeastSquaresFit {
  Eigen::VectorXd coef;
  Eigen::Index rank = 0;
  bool full_rank() const { return rank == coef.size(); }
};

inline LeastSquaresFit least_squares(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(x);
  return {cod.solve(y), cod.rank()};
}

/// Same solution from accumulated normal equations (X'X) b = X'y. The
/// pseudo-inverse of X'X applied to X'y is the minimum-norm least-squares
/// solution, so this matches least_squares() for designs too tall to factor.
inline LeastSquaresFit least_squares_gram(const Eigen::MatrixXd& gram, const Eigen::VectorXd& xty) {
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(gram);
  return {cod.solve(xty), cod.rank()};
}

/// [1, x] . coef
inline double predict_affine(const Eigen::VectorXd& coef, std::span<const double> x) {
  double v = coef[0];
  for (std::size_t j = 0; j < x.size(); ++j) v += coef[static_cast<Eigen::Index>(j + 1)] * x[j];
  return v;
}

}  // namespace hetgain
