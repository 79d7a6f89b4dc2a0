#include <cmath>
#include <cstdint>
#include <vector>

#include "doctest.h"

#include "psdn/errors.hpp"
#include "psdn/patch_ops.hpp"
#include "psdn/priors.hpp"
#include "psdn/sampler.hpp"

#include "support.hpp"

using namespace psdn;

TEST_CASE("sampler: deterministic in the master seed")
{
    const PatchGrid g = testsupport::grid44_overlap();
    const L2SqPrior prior(4, 0.5);
    SampleJob job;
    job.grid = &g;
    job.prior = &prior;
    job.seed = 2024;
    job.count = 3;

    const auto a = sample_prior_image(job);
    const auto b = sample_prior_image(job);
    REQUIRE(a.size() == 3);
    REQUIRE(b.size() == 3);
    for (int i = 0; i < 3; ++i)
        CHECK(a[i].data == b[i].data);

    job.seed = 2025;
    const auto c = sample_prior_image(job);
    CHECK(a[0].data != c[0].data);

    // Image i of a batch equals image 0 of a batch whose draws start at
    // index i: the per-image sub-seeding is positional, not sequential.
    const PatchStack s2 = sample_patch_stack(g, prior, 2024, 2);
    const ImageBuffer x2 = synthesize(g, s2);
    CHECK(x2.data == a[2].data);
}

TEST_CASE("sampler: near-delta mixture yields near-constant images")
{
    std::vector<double> w = {1.0};
    std::vector<double> m(4, 0.37);
    std::vector<double> c(16, 0.0);
    for (int i = 0; i < 4; ++i)
        c[i * 4 + i] = 1e-12;
    const GmmPrior gmm(4, w, m, c);

    const PatchGrid g = testsupport::grid44_overlap();
    SampleJob job;
    job.grid = &g;
    job.prior = &gmm;
    job.seed = 7;
    job.count = 5;
    for (const ImageBuffer& img : sample_prior_image(job))
        for (double v : img.data)
            CHECK(std::abs(v - 0.37) <= 1e-4);
}

TEST_CASE("sampler: pixel variance follows 1 / (2 lambda count)")
{
    // Patch entries under the squared-l2 penalty are N(0, 1/(2 lambda)).
    // Averaging the c independent draws covering a pixel divides the
    // variance by c. Tiling keeps it; overlap shrinks it per pixel.
    const double lambda = 0.5;
    const int images = 20000;

    const PatchGrid tiling = testsupport::grid44_tiling();
    const PatchGrid overlap = testsupport::grid44_overlap();
    const L2SqPrior prior(4, lambda);

    for (const PatchGrid* gp : {&tiling, &overlap}) {
        const PatchGrid& g = *gp;
        std::vector<double> sum(static_cast<std::size_t>(g.num_pixels()), 0.0);
        std::vector<double> sumsq(sum.size(), 0.0);
        for (int i = 0; i < images; ++i) {
            const PatchStack z = sample_patch_stack(g, prior, 99, i);
            const ImageBuffer img = synthesize(g, z);
            for (std::size_t p = 0; p < sum.size(); ++p) {
                sum[p] += img.data[p];
                sumsq[p] += img.data[p] * img.data[p];
            }
        }
        for (std::size_t p = 0; p < sum.size(); ++p) {
            const double mean = sum[p] / images;
            const double var = sumsq[p] / images - mean * mean;
            const double expected = 1.0 / (2.0 * lambda * g.counts[p]);
            CHECK(std::abs(var - expected) <= 0.10 * expected);
            // Mean 0 within 5 standard errors of the sample mean.
            CHECK(std::abs(mean) <= 5.0 * std::sqrt(expected / images));
        }
    }
}

TEST_CASE("sampler: raw stacks leave the consensus subspace")
{
    const PatchGrid g = testsupport::grid44_overlap();
    const L2SqPrior prior(4, 0.5);
    const PatchStack z = sample_patch_stack(g, prior, 31, 0);
    const PatchStack proj = project_range(g, z);
    CHECK(testsupport::max_abs_diff(z.data, proj.data) > 1e-6);
}

TEST_CASE("sampler: rejects unsampleable priors and bad jobs")
{
    const PatchGrid g = testsupport::grid44_overlap();
    const auto dct = make_prior("dct-l1", 2, 2, 1.0);
    SampleJob job;
    job.grid = &g;
    job.prior = dct.get();
    job.seed = 1;
    job.count = 1;
    CHECK_THROWS_AS(sample_prior_image(job), capability_error);

    const L1Prior l1(4, 1.0);
    job.prior = &l1;
    job.count = 0;
    CHECK_THROWS_AS(sample_prior_image(job), std::invalid_argument);

    const L1Prior mismatched(5, 1.0);
    job.prior = &mismatched;
    job.count = 1;
    CHECK_THROWS_AS(sample_prior_image(job), std::invalid_argument);
}
