#pragma once

#include <cstdint>
#include <vector>

#include "psdn/image.hpp"
#include "psdn/patch_grid.hpp"
#include "psdn/priors.hpp"

namespace psdn {

struct SampleJob {
    const PatchGrid* grid = nullptr;
    const PatchPrior* prior = nullptr;
    std::uint64_t seed = 0;
    int count = 1;
};

/// Stack of M independent prior draws for one image. Patch m of image
/// image_index is drawn with derive_subseed(master_seed, image_index, m)
/// (rng.hpp), so the result is reproducible and independent of any
/// parallel execution order.
PatchStack sample_patch_stack(const PatchGrid& grid, const PatchPrior& prior,
                              std::uint64_t master_seed, std::int64_t image_index);

/// count images, each the averaging synthesis Q z of a fresh stack z of
/// independent patch draws. Requires a sampleable prior (capability_error
/// otherwise) and count >= 1.
std::vector<ImageBuffer> sample_prior_image(const SampleJob& job);

} // namespace psdn
