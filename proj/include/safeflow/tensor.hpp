//
// Project safeflow - Copyright 2026 the safeflow authors.
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

#include "safeflow/error.hpp"

namespace safeflow {

// Dense row-major tensor of 64-bit reals.
struct Tensor {
  std::vector<std::size_t> dims;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::initializer_list<std::size_t> shape) : dims(shape) {
    data.assign(numel(), 0.0);
  }
  explicit Tensor(std::vector<std::size_t> shape) : dims(std::move(shape)) {
    data.assign(numel(), 0.0);
  }

  std::size_t numel() const {
    std::size_t n = 1;
    for (std::size_t d : dims) {
      n *= d;
    }
    return dims.empty() ? 0 : n;
  }

  std::size_t rows() const { return dims.empty() ? 0 : dims[0]; }
  std::size_t cols() const { return dims.size() < 2 ? 1 : dims[1]; }

  bool same_shape(const Tensor &o) const { return dims == o.dims; }
};

}  // namespace safeflow
