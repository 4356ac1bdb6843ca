#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ursa/tensor.hpp"

namespace ursa {

/// A trainable tensor with its gradient accumulator.
///
/// `row_sparse` parameters (the embedding table) record which rows received
/// gradient since the last optimizer step; only those rows are regularized
/// and updated. Row 0 of a row-sparse parameter is the PAD row and is never
/// marked.
struct Param {
  std::string name;
  Tensor value;
  Tensor grad;
  bool decay = true;
  bool row_sparse = false;
  std::vector<std::uint8_t> touched;

  Param() = default;
  Param(std::string n, Tensor v, bool weight_decay = true, bool sparse = false)
      : name(std::move(n)), value(std::move(v)), grad(value.shape()), decay(weight_decay), row_sparse(sparse) {
    if (row_sparse) touched.assign(value.rows(), 0);
  }

  void zero_grad() {
    grad.fill(0.0);
    if (row_sparse) std::fill(touched.begin(), touched.end(), 0);
  }

  void touch(std::size_t row) {
    if (row_sparse && row != 0) touched[row] = 1;
  }
};

}  // namespace ursa
