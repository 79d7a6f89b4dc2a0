#include "psdn/patch_ops.hpp"

#include <stdexcept>

namespace psdn {

namespace {

void require_image(const PatchGrid& grid, const ImageBuffer& img, const char* what)
{
    if (img.height != grid.image_height || img.width != grid.image_width ||
        img.data.size() != static_cast<std::size_t>(img.num_pixels()))
        throw std::invalid_argument(std::string(what) + ": image does not match grid");
}

} // namespace

PatchStack extract(const PatchGrid& grid, const ImageBuffer& img)
{
    require_image(grid, img, "extract");
    PatchStack out;
    out.grid = &grid;
    out.data.resize(static_cast<std::size_t>(grid.stack_len()));
    const int n = grid.patch_dim();
    const std::int64_t M = grid.num_patches;
    const double* src = img.data.data();
    double* dst = out.data.data();
    const std::int32_t* fp = grid.footprints.data();
#pragma omp parallel for schedule(static)
    for (std::int64_t m = 0; m < M; ++m) {
        const std::size_t base = static_cast<std::size_t>(m) * n;
        for (int j = 0; j < n; ++j)
            dst[base + j] = src[fp[base + j]];
    }
    return out;
}

ImageBuffer synthesize(const PatchGrid& grid, const PatchStack& stack)
{
    require_stack(grid, stack, "synthesize");
    ImageBuffer out(grid.image_height, grid.image_width);
    const std::int64_t N = grid.num_pixels();
    const double* src = stack.data.data();
    double* dst = out.data.data();
    const std::int64_t* off = grid.pixel_slot_offsets.data();
    const std::uint32_t* slots = grid.pixel_slots.data();
    const std::int32_t* counts = grid.counts.data();
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < N; ++i) {
        double acc = 0.0;
        for (std::int64_t k = off[i]; k < off[i + 1]; ++k)
            acc += src[slots[k]];
        dst[i] = acc / counts[i];
    }
    return out;
}

PatchStack synthesize_adjoint(const PatchGrid& grid, const ImageBuffer& img)
{
    require_image(grid, img, "synthesize_adjoint");
    PatchStack out;
    out.grid = &grid;
    out.data.resize(static_cast<std::size_t>(grid.stack_len()));
    const int n = grid.patch_dim();
    const std::int64_t M = grid.num_patches;
    const double* src = img.data.data();
    double* dst = out.data.data();
    const std::int32_t* fp = grid.footprints.data();
    const std::int32_t* counts = grid.counts.data();
#pragma omp parallel for schedule(static)
    for (std::int64_t m = 0; m < M; ++m) {
        const std::size_t base = static_cast<std::size_t>(m) * n;
        for (int j = 0; j < n; ++j) {
            const std::int32_t px = fp[base + j];
            dst[base + j] = src[px] / counts[px];
        }
    }
    return out;
}

ImageBuffer extract_adjoint(const PatchGrid& grid, const PatchStack& stack)
{
    require_stack(grid, stack, "extract_adjoint");
    ImageBuffer out(grid.image_height, grid.image_width);
    const std::int64_t N = grid.num_pixels();
    const double* src = stack.data.data();
    double* dst = out.data.data();
    const std::int64_t* off = grid.pixel_slot_offsets.data();
    const std::uint32_t* slots = grid.pixel_slots.data();
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < N; ++i) {
        double acc = 0.0;
        for (std::int64_t k = off[i]; k < off[i + 1]; ++k)
            acc += src[slots[k]];
        dst[i] = acc;
    }
    return out;
}

std::vector<double> qqt_diag(const PatchGrid& grid)
{
    std::vector<double> d(grid.counts.size());
    for (std::size_t i = 0; i < d.size(); ++i)
        d[i] = 1.0 / grid.counts[i];
    return d;
}

PatchStack project_range(const PatchGrid& grid, const PatchStack& stack)
{
    return extract(grid, synthesize(grid, stack));
}

} // namespace psdn
