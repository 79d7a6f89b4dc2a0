#pragma once

#include "psdn/image.hpp"
#include "psdn/patch_grid.hpp"

namespace psdn {

// Linear operators induced by a patch grid. With P the stacked patch
// extraction matrix and C = diag(counts), the averaging synthesis operator
// is Q = C^-1 P^T, so Q P = I (synthesize inverts extract on consensus
// stacks) while P Q is the idempotent projector onto extracted stacks.
//
// All kernels are OpenMP-parallel over independent output elements with a
// fixed per-element summation order, so results are bit-identical regardless
// of thread count. Serial counterparts for testing and benchmarking live in
// serial_ref.hpp.

/// P: gather image samples into a patch stack.
PatchStack extract(const PatchGrid& grid, const ImageBuffer& img);

/// Q: per-pixel average of all stack samples covering the pixel.
ImageBuffer synthesize(const PatchGrid& grid, const PatchStack& stack);

/// Q^T: extract, scaling each sample by 1/count of its source pixel.
PatchStack synthesize_adjoint(const PatchGrid& grid, const ImageBuffer& img);

/// P^T: per-pixel sum (no averaging) of all stack samples covering it.
ImageBuffer extract_adjoint(const PatchGrid& grid, const PatchStack& stack);

/// diag(Q Q^T) = 1/counts, one entry per pixel.
std::vector<double> qqt_diag(const PatchGrid& grid);

/// P Q: synthesize then re-extract; projects a stack onto the range of P.
PatchStack project_range(const PatchGrid& grid, const PatchStack& stack);

} // namespace psdn
