#include "psdn/patch_grid.hpp"

#include <limits>
#include <stdexcept>
#include <string>

#include "psdn/errors.hpp"

namespace psdn {

bool PatchGrid::overlapping() const
{
    for (std::int32_t c : counts)
        if (c > 1)
            return true;
    return false;
}

bool same_geometry(const PatchGrid& a, const PatchGrid& b)
{
    return a.image_height == b.image_height && a.image_width == b.image_width &&
           a.patch_height == b.patch_height && a.patch_width == b.patch_width &&
           a.stride_y == b.stride_y && a.stride_x == b.stride_x &&
           a.boundary == b.boundary;
}

PatchGrid plan_grid(int image_height, int image_width, int patch_height,
                    int patch_width, int stride_y, int stride_x, Boundary boundary)
{
    if (image_height <= 0 || image_width <= 0)
        throw geometry_error("plan_grid: non-positive image dimensions");
    if (patch_height < 1 || patch_width < 1)
        throw geometry_error("plan_grid: non-positive patch dimensions");
    if (patch_height > image_height || patch_width > image_width)
        throw geometry_error("plan_grid: patch exceeds image dimensions");
    if (stride_y < 1 || stride_x < 1)
        throw geometry_error("plan_grid: strides must be >= 1");

    PatchGrid g;
    g.image_height = image_height;
    g.image_width = image_width;
    g.patch_height = patch_height;
    g.patch_width = patch_width;
    g.stride_y = stride_y;
    g.stride_x = stride_x;
    g.boundary = boundary;

    std::vector<int> rows, cols;
    if (boundary == Boundary::clip) {
        for (int r = 0; r + patch_height <= image_height; r += stride_y)
            rows.push_back(r);
        for (int c = 0; c + patch_width <= image_width; c += stride_x)
            cols.push_back(c);
    } else {
        for (int r = 0; r < image_height; r += stride_y)
            rows.push_back(r);
        for (int c = 0; c < image_width; c += stride_x)
            cols.push_back(c);
    }

    g.num_patches = static_cast<std::int64_t>(rows.size()) * cols.size();
    const int n = g.patch_dim();
    const std::int64_t N = g.num_pixels();
    if (g.num_patches * n > std::numeric_limits<std::uint32_t>::max())
        throw geometry_error("plan_grid: patch stack too large for slot indexing");

    g.footprints.resize(static_cast<std::size_t>(g.num_patches) * n);
    g.counts.assign(static_cast<std::size_t>(N), 0);

    std::size_t pos = 0;
    for (int r : rows)
        for (int c : cols)
            for (int dy = 0; dy < patch_height; ++dy)
                for (int dx = 0; dx < patch_width; ++dx) {
                    int rr = r + dy;
                    int cc = c + dx;
                    if (boundary == Boundary::periodic) {
                        if (rr >= image_height) rr -= image_height;
                        if (cc >= image_width) cc -= image_width;
                    }
                    const std::int32_t px = rr * image_width + cc;
                    g.footprints[pos++] = px;
                    ++g.counts[static_cast<std::size_t>(px)];
                }

    for (std::int64_t i = 0; i < N; ++i)
        if (g.counts[static_cast<std::size_t>(i)] == 0) {
            const int r = static_cast<int>(i / image_width);
            const int c = static_cast<int>(i % image_width);
            throw geometry_error("plan_grid: no patch covers pixel (" +
                                 std::to_string(r) + ", " + std::to_string(c) + ")");
        }

    // CSR inverse map. Filling in slot order keeps each pixel's slot list
    // sorted, which fixes the summation order of every gather.
    g.pixel_slot_offsets.assign(static_cast<std::size_t>(N) + 1, 0);
    for (std::int64_t i = 0; i < N; ++i)
        g.pixel_slot_offsets[static_cast<std::size_t>(i) + 1] =
            g.pixel_slot_offsets[static_cast<std::size_t>(i)] +
            g.counts[static_cast<std::size_t>(i)];
    g.pixel_slots.resize(g.footprints.size());
    std::vector<std::int64_t> cursor(g.pixel_slot_offsets.begin(),
                                     g.pixel_slot_offsets.end() - 1);
    for (std::size_t slot = 0; slot < g.footprints.size(); ++slot) {
        const std::int32_t px = g.footprints[slot];
        g.pixel_slots[static_cast<std::size_t>(cursor[static_cast<std::size_t>(px)]++)] =
            static_cast<std::uint32_t>(slot);
    }
    return g;
}

PatchStack zeros_like(const PatchGrid& grid)
{
    PatchStack s;
    s.grid = &grid;
    s.data.assign(static_cast<std::size_t>(grid.stack_len()), 0.0);
    return s;
}

void require_stack(const PatchGrid& grid, const PatchStack& stack, const char* what)
{
    if (stack.grid == nullptr)
        throw std::invalid_argument(std::string(what) + ": stack without a grid");
    if (stack.grid != &grid && !same_geometry(*stack.grid, grid))
        throw std::invalid_argument(std::string(what) + ": stack belongs to a different grid");
    if (stack.data.size() != static_cast<std::size_t>(grid.stack_len()))
        throw std::invalid_argument(std::string(what) + ": stack length mismatch");
}

} // namespace psdn
