#pragma once

#include <Eigen/Core>

#include "css/tensor.hpp"

namespace css::detail {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
Eigen::Map<const RowMat<T>> view(const Tensor<T>& t) {
  return {t.data().data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols())};
}

template <typename T>
Eigen::Map<RowMat<T>> view(Tensor<T>& t) {
  return {t.data().data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols())};
}

template <typename T>
Eigen::Map<const RowMat<T>> view(const Tensor<T>& t, std::size_t rows, std::size_t cols) {
  return {t.data().data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)};
}

template <typename T>
Eigen::Map<RowMat<T>> view(Tensor<T>& t, std::size_t rows, std::size_t cols) {
  return {t.data().data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)};
}

}  // namespace css::detail
