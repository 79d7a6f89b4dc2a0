#pragma once

#include <cstdint>
#include <vector>

namespace psdn {

enum class Boundary { clip, periodic };

/// Patch extraction geometry over an image. Patch top-left corners are
/// enumerated row-major over the stride lattice; "clip" keeps only corners
/// whose patch lies fully inside the image, "periodic" takes every lattice
/// corner below the image dimensions and wraps indices. Footprints store the
/// absolute pixel index of each patch sample, row-major within the patch, so
/// no index arithmetic is repeated downstream.
struct PatchGrid {
    int image_height = 0;
    int image_width = 0;
    int patch_height = 0;
    int patch_width = 0;
    int stride_y = 1;
    int stride_x = 1;
    Boundary boundary = Boundary::clip;

    std::int64_t num_patches = 0;           // M
    std::vector<std::int32_t> footprints;   // M*n pixel indices, patch-major
    std::vector<std::int32_t> counts;       // per pixel: patches covering it, >= 1

    // Inverse map, CSR over pixels: slots of the patch stack that read or
    // write pixel i are pixel_slots[pixel_slot_offsets[i] ..
    // pixel_slot_offsets[i+1]), in increasing slot order. This is what makes
    // the scatter kernels deterministic under parallel execution.
    std::vector<std::int64_t> pixel_slot_offsets; // N+1
    std::vector<std::uint32_t> pixel_slots;       // M*n flat slot indices

    int patch_dim() const { return patch_height * patch_width; } // n
    std::int64_t num_pixels() const
    {
        return static_cast<std::int64_t>(image_height) * image_width; // N
    }
    std::int64_t stack_len() const { return num_patches * patch_dim(); }

    std::int32_t footprint(std::int64_t m, int j) const
    {
        return footprints[static_cast<std::size_t>(m) * patch_dim() + j];
    }

    /// True when some pixel is covered by more than one patch.
    bool overlapping() const;
};

/// True when the two grids were planned from identical geometry parameters.
bool same_geometry(const PatchGrid& a, const PatchGrid& b);

/// Plans a grid. Throws geometry_error when the patch exceeds the image,
/// strides are < 1, or the corner set leaves some pixel uncovered (the
/// message names the first uncovered pixel).
PatchGrid plan_grid(int image_height, int image_width, int patch_height,
                    int patch_width, int stride_y, int stride_x, Boundary boundary);

/// Patch stack: one length-n vector per patch, patch-major, so patch m
/// occupies data[m*n .. (m+1)*n). Carries a pointer to the grid it was laid
/// out for; the grid must outlive the stack.
struct PatchStack {
    const PatchGrid* grid = nullptr;
    std::vector<double> data;
};

PatchStack zeros_like(const PatchGrid& grid);

/// Throws std::invalid_argument when the stack does not belong to this grid
/// (different geometry or wrong length).
void require_stack(const PatchGrid& grid, const PatchStack& stack, const char* what);

} // namespace psdn
