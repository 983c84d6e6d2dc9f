#pragma once

#include <cstddef>

#include "hred/rng.hpp"
#include "hred/tensor.hpp"

namespace hred {

/// I.i.d. N(0, std^2) draws. Throws std::invalid_argument for std <= 0.
Tensor gaussian_init(const Shape& shape, double std, Rng& rng);

/// Orthogonalized Gaussian draw (QR with a positive R diagonal). For
/// rows >= cols the columns are orthonormal, otherwise the rows are.
Tensor orthogonal_init(std::size_t rows, std::size_t cols, Rng& rng);

}  // namespace hred
