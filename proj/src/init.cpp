#include "hred/init.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace hred {

Tensor gaussian_init(const Shape& shape, double std, Rng& rng) {
  if (!(std > 0.0)) throw std::invalid_argument("gaussian_init: std must be positive");
  Tensor t(shape);
  for (double& v : t.values()) v = std * rng.normal();
  return t;
}

namespace {

// Modified Gram-Schmidt with one re-orthogonalization pass over the columns
// of a tall n x m matrix (n >= m), stored column-major in `cols`. Each column
// keeps the sign of its projection onto the original draw, which is the same
// as forcing a positive R diagonal.
void orthonormalize(std::vector<std::vector<double>>& cols) {
  for (std::size_t j = 0; j < cols.size(); ++j) {
    auto& v = cols[j];
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t i = 0; i < j; ++i) {
        double dot = 0.0;
        for (std::size_t r = 0; r < v.size(); ++r) dot += cols[i][r] * v[r];
        for (std::size_t r = 0; r < v.size(); ++r) v[r] -= dot * cols[i][r];
      }
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm < 1e-300) throw std::runtime_error("orthogonal_init: degenerate Gaussian draw");
    for (double& x : v) x /= norm;
  }
}

}  // namespace

Tensor orthogonal_init(std::size_t rows, std::size_t cols, Rng& rng) {
  if (rows == 0 || cols == 0) throw std::invalid_argument("orthogonal_init: dimensions must be >= 1");
  const std::size_t tall = std::max(rows, cols);
  const std::size_t wide = std::min(rows, cols);

  // Draw in row-major order of the requested shape so the consumption of the
  // stream does not depend on the orientation trick below.
  Tensor draw({rows, cols});
  for (double& v : draw.values()) v = rng.normal();

  std::vector<std::vector<double>> basis(wide, std::vector<double>(tall));
  for (std::size_t j = 0; j < wide; ++j)
    for (std::size_t i = 0; i < tall; ++i)
      basis[j][i] = rows >= cols ? draw.at(i, j) : draw.at(j, i);
  orthonormalize(basis);

  Tensor q({rows, cols});
  for (std::size_t j = 0; j < wide; ++j)
    for (std::size_t i = 0; i < tall; ++i) {
      if (rows >= cols) q.at(i, j) = basis[j][i];
      else q.at(j, i) = basis[j][i];
    }
  return q;
}

}  // namespace hred
