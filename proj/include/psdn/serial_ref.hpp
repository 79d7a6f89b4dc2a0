#pragma once

#include "psdn/image.hpp"
#include "psdn/patch_grid.hpp"

namespace psdn::serial {

// Single-threaded reference kernels, written as plain scatter/gather loops
// straight from the operator definitions and independent of the CSR layout
// the parallel kernels use. Tests compare these against the OpenMP versions;
// the benchmark times both.

PatchStack extract(const PatchGrid& grid, const ImageBuffer& img);
ImageBuffer synthesize(const PatchGrid& grid, const PatchStack& stack);
PatchStack synthesize_adjoint(const PatchGrid& grid, const ImageBuffer& img);
ImageBuffer extract_adjoint(const PatchGrid& grid, const PatchStack& stack);
PatchStack project_range(const PatchGrid& grid, const PatchStack& stack);

/// Reference form of the quadratic patch-stack update used by the synthesis
/// solver (see solvers.hpp), composed from the serial kernels above.
PatchStack synthesis_z_update(const PatchGrid& grid, const ImageBuffer& y,
                              const PatchStack& u, const PatchStack& d,
                              double sigma, double rho);

} // namespace psdn::serial
