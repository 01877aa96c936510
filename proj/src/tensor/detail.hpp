#pragma once

#include <cstdint>

#include "t2d/tensor.hpp"

namespace t2d::ops::detail {

void add_macs(std::uint64_t n);

inline void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                     shape_str(t.shape()));
  }
}

}  // namespace t2d::ops::detail
