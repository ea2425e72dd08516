/*
 * Copyright 2026 The AGP Lab Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */


#ifndef AGP_MATRIX_HPP
#define AGP_MATRIX_HPP

#include <Eigen/Dense>

#include <initializer_list>
#include <optional>
#include <string>
#include <vector>

#include "agp/error.hpp"

namespace agp {

/// Dense double-precision matrix, row-major.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Index = Eigen::Index;

inline std::string shape_str(const Matrix &m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

inline void require_same_shape(const Matrix &a, const Matrix &b, const char *op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " +
                         shape_str(b));
}

inline void require_finite(const Matrix &m, const char *op) {
  if (!m.allFinite())
    throw NumericError(std::string(op) + ": non-finite entry");
}

/// Builds a matrix from nested row lists, e.g. `make_matrix({{1, 2}, {3, 4}})`.
inline Matrix make_matrix(std::initializer_list<std::initializer_list<double>> rows) {
  const Index r = static_cast<Index>(rows.size());
  const Index c = r == 0 ? 0 : static_cast<Index>(rows.begin()->size());
  Matrix m(r, c);
  Index i = 0;
  for (const auto &row : rows) {
    if (static_cast<Index>(row.size()) != c)
      throw DimensionError("make_matrix: ragged rows");
    Index j = 0;
    for (double v : row)
      m(i, j++) = v;
    ++i;
  }
  return m;
}

inline Matrix matmul(const Matrix &a, const Matrix &b) {
  if (a.cols() != b.rows())
    throw DimensionError("matmul: " + shape_str(a) + " x " + shape_str(b));
  return a * b;
}

enum class ElementwiseOp { add, sub, hadamard, relu, sigmoid, sign, clamp };

inline double sigmoid(double z) {
  if (z >= 0.0)
    return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

inline Matrix clamp(const Matrix &a, double lo, double hi) {
  if (lo > hi)
    throw ConfigError("clamp: lo > hi");
  return a.cwiseMax(lo).cwiseMin(hi);
}

/// Entrywise operations. Binary ops need `b`; `clamp` reads `lo`/`hi`.
inline Matrix elementwise(ElementwiseOp op, const Matrix &a, const std::optional<Matrix> &b = {},
                          double lo = 0.0, double hi = 0.0) {
  auto binary = [&](const char *name) -> const Matrix & {
    if (!b)
      throw DimensionError(std::string(name) + ": missing second operand");
    require_same_shape(a, *b, name);
    return *b;
  };
  switch (op) {
  case ElementwiseOp::add:
    return a + binary("add");
  case ElementwiseOp::sub:
    return a - binary("sub");
  case ElementwiseOp::hadamard:
    return a.cwiseProduct(binary("hadamard"));
  case ElementwiseOp::relu:
    return a.cwiseMax(0.0);
  case ElementwiseOp::sigmoid:
    return a.unaryExpr([](double v) { return sigmoid(v); });
  case ElementwiseOp::sign:
    return a.unaryExpr([](double v) { return sign(v); });
  case ElementwiseOp::clamp:
    return clamp(a, lo, hi);
  }
  return a;
}

inline Matrix sign(const Matrix &a) { return elementwise(ElementwiseOp::sign, a); }

inline double max_abs(const Matrix &a) { return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff(); }

inline Index count_nonzero(const Matrix &a) {
  return static_cast<Index>((a.array() != 0.0).count());
}

} // namespace agp

#endif
