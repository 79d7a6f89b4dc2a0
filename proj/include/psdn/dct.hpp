#pragma once

#include <vector>

namespace psdn {

/// Orthonormal DCT-II matrix of size L x L, row-major; row k is the k-th
/// frequency: T[k][i] = s_k cos(pi (2i+1) k / (2L)), s_0 = sqrt(1/L),
/// s_k = sqrt(2/L) otherwise.
std::vector<double> dct2_matrix_1d(int L);

/// Separable 2D version for a ph x pw patch (n = ph*pw), row-major n x n:
/// the Kronecker product of the row and column 1D transforms. Row 0 is the
/// constant (DC) basis vector.
std::vector<double> dct2_matrix_2d(int patch_height, int patch_width);

} // namespace psdn
