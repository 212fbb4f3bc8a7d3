#pragma once

#include <span>

#include <Eigen/Core>

namespace fgpart {

using RowMatrixD = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMatrixF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <class Matrix>
auto row_span(const Matrix& m, Eigen::Index r) {
  using T = typename Matrix::Scalar;
  return std::span<const T>(m.data() + r * m.cols(), static_cast<std::size_t>(m.cols()));
}

template <class Matrix>
auto row_span(Matrix& m, Eigen::Index r) {
  using T = typename Matrix::Scalar;
  return std::span<T>(m.data() + r * m.cols(), static_cast<std::size_t>(m.cols()));
}

}  // namespace fgpart
