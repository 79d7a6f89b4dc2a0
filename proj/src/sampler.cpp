#include "psdn/sampler.hpp"

#include <stdexcept>

#include "psdn/errors.hpp"
#include "psdn/patch_ops.hpp"
#include "psdn/rng.hpp"

namespace psdn {

PatchStack sample_patch_stack(const PatchGrid& grid, const PatchPrior& prior,
                              std::uint64_t master_seed, std::int64_t image_index)
{
    if (prior.patch_dim() != grid.patch_dim())
        throw std::invalid_argument("sample_patch_stack: prior patch dim does not match grid");
    if (!prior.can_sample())
        throw capability_error("sample_patch_stack: prior cannot be sampled");

    PatchStack stack;
    stack.grid = &grid;
    stack.data.resize(static_cast<std::size_t>(grid.stack_len()));
    const int n = grid.patch_dim();
    const std::int64_t M = grid.num_patches;
    double* dst = stack.data.data();
#pragma omp parallel for schedule(static)
    for (std::int64_t m = 0; m < M; ++m)
        prior.sample(derive_subseed(master_seed, static_cast<std::uint64_t>(image_index),
                                    static_cast<std::uint64_t>(m)),
                     std::span<double>(dst + static_cast<std::size_t>(m) * n,
                                       static_cast<std::size_t>(n)));
    return stack;
}

std::vector<ImageBuffer> sample_prior_image(const SampleJob& job)
{
    if (job.grid == nullptr || job.prior == nullptr)
        throw std::invalid_argument("sample_prior_image: grid and prior are required");
    if (job.count < 1)
        throw std::invalid_argument("sample_prior_image: count must be >= 1");
    if (!job.prior->can_sample())
        throw capability_error("sample_prior_image: prior cannot be sampled");

    std::vector<ImageBuffer> out;
    out.reserve(static_cast<std::size_t>(job.count));
    for (int i = 0; i < job.count; ++i)
        out.push_back(synthesize(*job.grid,
                                 sample_patch_stack(*job.grid, *job.prior, job.seed, i)));
    return out;
}

} // namespace psdn
