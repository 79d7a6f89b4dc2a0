#pragma once

// Shared fixtures for the test suites: the small reference geometries, random
// input builders, and a range-constrained variant of the synthesis solver
// used by the formulation-comparison tests.

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "psdn/image.hpp"
#include "psdn/patch_grid.hpp"
#include "psdn/patch_ops.hpp"
#include "psdn/priors.hpp"
#include "psdn/rng.hpp"
#include "psdn/solvers.hpp"

namespace testsupport {

/// 1x4 periodic image with 1x2 patches: footprints {0,1},{1,2},{2,3},{3,0},
/// every pixel covered twice. The smallest overlapping geometry.
inline psdn::PatchGrid ring4_grid()
{
    return psdn::plan_grid(1, 4, 1, 2, 1, 1, psdn::Boundary::periodic);
}

/// 4x4 image, 2x2 patches, stride 1, clip: M = 9, counts 1/2/4.
inline psdn::PatchGrid grid44_overlap()
{
    return psdn::plan_grid(4, 4, 2, 2, 1, 1, psdn::Boundary::clip);
}

/// 4x4 image, 2x2 patches, stride 2, clip: exact tiling, counts all 1.
inline psdn::PatchGrid grid44_tiling()
{
    return psdn::plan_grid(4, 4, 2, 2, 2, 2, psdn::Boundary::clip);
}

inline psdn::ImageBuffer random_image(int h, int w, std::uint64_t seed,
                                      double lo = 0.0, double hi = 1.0)
{
    psdn::Rng rng(seed);
    psdn::ImageBuffer img(h, w);
    for (double& v : img.data)
        v = lo + (hi - lo) * rng.u01();
    return img;
}

inline psdn::PatchStack random_stack(const psdn::PatchGrid& grid, std::uint64_t seed,
                                     double scale = 1.0)
{
    psdn::Rng rng(seed);
    psdn::PatchStack stack = psdn::zeros_like(grid);
    for (double& v : stack.data)
        v = scale * rng.normal();
    return stack;
}

inline psdn::PatchStack stack_of(const psdn::PatchGrid& grid, std::vector<double> values)
{
    psdn::PatchStack stack = psdn::zeros_like(grid);
    if (values.size() != stack.data.size())
        throw std::invalid_argument("stack_of: wrong length");
    stack.data = std::move(values);
    return stack;
}

inline psdn::ImageBuffer image_of(int h, int w, std::vector<double> values)
{
    psdn::ImageBuffer img(h, w);
    if (values.size() != img.data.size())
        throw std::invalid_argument("image_of: wrong length");
    img.data = std::move(values);
    return img;
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b)
{
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

inline double max_abs(std::span<const double> a)
{
    double m = 0.0;
    for (double v : a)
        m = std::max(m, std::abs(v));
    return m;
}

inline double norm2(std::span<const double> a)
{
    double s = 0.0;
    for (double v : a)
        s += v * v;
    return std::sqrt(s);
}

/// Synthesis-form ADMM restricted to consensus stacks: identical to the
/// library solver except that every quadratic update is followed by the
/// range projection P Q. Because Q^T Q commutes with P Q (both reduce to
/// P diag(.) P^T), the projected quadratic step is the exact minimizer over
/// the constraint subspace, so this solves the synthesis objective subject
/// to z = P x for some image x — which is precisely the analysis problem.
/// Kept test-local: the library ships the two formulations as distinct
/// solvers, and this bridge exists to check they relate as expected.
inline psdn::ImageBuffer denoise_projected_synthesis(const psdn::ImageBuffer& y,
                                                     const psdn::PatchGrid& grid,
                                                     const psdn::PatchPrior& prior,
                                                     const psdn::AdmmConfig& cfg)
{
    const std::int64_t len = grid.stack_len();
    psdn::PatchStack z = psdn::project_range(grid, psdn::extract(grid, y));
    psdn::PatchStack u = z;
    psdn::PatchStack d = psdn::zeros_like(grid);
    std::vector<double> u_prev(static_cast<std::size_t>(len));
    std::vector<double> zd(static_cast<std::size_t>(prior.patch_dim()));

    for (int it = 0; it < cfg.max_iter; ++it) {
        psdn::PatchStack rhs = psdn::zeros_like(grid);
        for (std::int64_t k = 0; k < len; ++k)
            rhs.data[k] = u.data[k] + d.data[k];
        z = psdn::project_range(grid, psdn::synthesis_z_update(grid, y, u, d, cfg.sigma, cfg.rho));

        u_prev = u.data;
        const int n = prior.patch_dim();
        for (std::int64_t m = 0; m < grid.num_patches; ++m) {
            for (int j = 0; j < n; ++j)
                zd[j] = z.data[m * n + j] - d.data[m * n + j];
            prior.prox(zd, 1.0 / cfg.rho, std::span<double>(u.data).subspan(m * n, n));
        }
        for (std::int64_t k = 0; k < len; ++k)
            d.data[k] += u.data[k] - z.data[k];

        double r = 0.0, s = 0.0, nz = 0.0, nu = 0.0, nd = 0.0;
        for (std::int64_t k = 0; k < len; ++k) {
            r += (z.data[k] - u.data[k]) * (z.data[k] - u.data[k]);
            s += (u.data[k] - u_prev[k]) * (u.data[k] - u_prev[k]);
            nz += z.data[k] * z.data[k];
            nu += u.data[k] * u.data[k];
            nd += d.data[k] * d.data[k];
        }
        const double root = std::sqrt(static_cast<double>(len));
        const double eps_pri = root * cfg.tol_abs +
                               cfg.tol_rel * std::max(std::sqrt(nz), std::sqrt(nu));
        const double eps_dua = root * cfg.tol_abs + cfg.tol_rel * cfg.rho * std::sqrt(nd);
        if (std::sqrt(r) <= eps_pri && cfg.rho * std::sqrt(s) <= eps_dua)
            break;
    }
    return psdn::synthesize(grid, z);
}

/// Instance on which the two formulations provably disagree: the ring
/// geometry with a prior that couples the two pixels of a patch (rotated
/// absolute-value penalty including the flat direction), so the synthesis
/// side can concentrate mass in favorable patches while the analysis side
/// pays the coupled penalty on every extracted patch.
struct WitnessInstance {
    psdn::PatchGrid grid = ring4_grid();
    psdn::AnalysisTransformPrior prior;
    psdn::ImageBuffer y;
    double sigma;

    WitnessInstance(double lambda, double sigma_in)
        : prior(psdn::AnalysisTransformPrior::dct(1, 2, psdn::InnerPenalty::l1, lambda,
                                                  /*penalize_dc=*/true)),
          y(image_of(1, 4, {1.0, 1.0, 0.0, 0.0})), sigma(sigma_in)
    {
    }
};

/// Frozen witness parameters used by both the unit test and the acceptance
/// run (chosen by a sweep over lambda and sigma, then fixed).
inline WitnessInstance default_witness()
{
    return WitnessInstance(0.5, 0.4);
}

} // namespace testsupport
