#include "psdn/serial_ref.hpp"

#include <stdexcept>

namespace psdn::serial {

PatchStack extract(const PatchGrid& grid, const ImageBuffer& img)
{
    PatchStack out;
    out.grid = &grid;
    out.data.resize(static_cast<std::size_t>(grid.stack_len()));
    const int n = grid.patch_dim();
    for (std::int64_t m = 0; m < grid.num_patches; ++m)
        for (int j = 0; j < n; ++j)
            out.data[static_cast<std::size_t>(m) * n + j] = img.data[grid.footprint(m, j)];
    return out;
}

ImageBuffer synthesize(const PatchGrid& grid, const PatchStack& stack)
{
    require_stack(grid, stack, "serial::synthesize");
    ImageBuffer acc(grid.image_height, grid.image_width);
    const int n = grid.patch_dim();
    for (std::int64_t m = 0; m < grid.num_patches; ++m)
        for (int j = 0; j < n; ++j)
            acc.data[grid.footprint(m, j)] += stack.data[static_cast<std::size_t>(m) * n + j];
    for (std::int64_t i = 0; i < grid.num_pixels(); ++i)
        acc.data[static_cast<std::size_t>(i)] /= grid.counts[static_cast<std::size_t>(i)];
    return acc;
}

PatchStack synthesize_adjoint(const PatchGrid& grid, const ImageBuffer& img)
{
    PatchStack out;
    out.grid = &grid;
    out.data.resize(static_cast<std::size_t>(grid.stack_len()));
    const int n = grid.patch_dim();
    for (std::int64_t m = 0; m < grid.num_patches; ++m)
        for (int j = 0; j < n; ++j) {
            const std::int32_t px = grid.footprint(m, j);
            out.data[static_cast<std::size_t>(m) * n + j] = img.data[px] / grid.counts[px];
        }
    return out;
}

ImageBuffer extract_adjoint(const PatchGrid& grid, const PatchStack& stack)
{
    require_stack(grid, stack, "serial::extract_adjoint");
    ImageBuffer acc(grid.image_height, grid.image_width);
    const int n = grid.patch_dim();
    for (std::int64_t m = 0; m < grid.num_patches; ++m)
        for (int j = 0; j < n; ++j)
            acc.data[grid.footprint(m, j)] += stack.data[static_cast<std::size_t>(m) * n + j];
    return acc;
}

PatchStack project_range(const PatchGrid& grid, const PatchStack& stack)
{
    return extract(grid, synthesize(grid, stack));
}

PatchStack synthesis_z_update(const PatchGrid& grid, const ImageBuffer& y,
                              const PatchStack& u, const PatchStack& d,
                              double sigma, double rho)
{
    if (!(sigma > 0.0) || !(rho > 0.0))
        throw std::invalid_argument("serial::synthesis_z_update: sigma and rho must be > 0");
    require_stack(grid, u, "serial::synthesis_z_update");
    require_stack(grid, d, "serial::synthesis_z_update");
    const double s2r = sigma * sigma * rho;

    PatchStack s = synthesize_adjoint(grid, y);
    for (std::size_t k = 0; k < s.data.size(); ++k)
        s.data[k] += s2r * (u.data[k] + d.data[k]);

    ImageBuffer qs = synthesize(grid, s);
    for (std::int64_t i = 0; i < grid.num_pixels(); ++i) {
        const std::size_t ii = static_cast<std::size_t>(i);
        qs.data[ii] /= s2r + 1.0 / grid.counts[ii];
    }

    PatchStack corr = synthesize_adjoint(grid, qs);
    PatchStack z = zeros_like(grid);
    for (std::size_t k = 0; k < z.data.size(); ++k)
        z.data[k] = (s.data[k] - corr.data[k]) / s2r;
    return z;
}

} // namespace psdn::serial
