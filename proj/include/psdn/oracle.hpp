#pragma once

#include <cstdint>
#include <vector>

#include "psdn/image.hpp"
#include "psdn/patch_grid.hpp"
#include "psdn/priors.hpp"

namespace psdn::oracle {

// Slow, literal-minded implementations used only to check the fast kernels.
// Everything here builds explicit dense matrices straight from the operator
// definitions; nothing calls the CSR-based fast paths. Sizes are guarded so
// a typo can't allocate gigabytes.

struct DenseMatrix {
    std::int64_t rows = 0;
    std::int64_t cols = 0;
    std::vector<double> data; // row-major

    DenseMatrix() = default;
    DenseMatrix(std::int64_t r, std::int64_t c)
        : rows(r), cols(c), data(static_cast<std::size_t>(r) * static_cast<std::size_t>(c), 0.0)
    {
    }

    double& at(std::int64_t r, std::int64_t c)
    {
        return data[static_cast<std::size_t>(r) * cols + c];
    }
    double at(std::int64_t r, std::int64_t c) const
    {
        return data[static_cast<std::size_t>(r) * cols + c];
    }
};

/// Entry guard for dense construction: rows*cols must stay <= 10^7.
constexpr std::int64_t kMaxDenseEntries = 10000000;

/// P as an (M n) x N 0/1 matrix: row (m n + j) has a single 1 in the column
/// of footprint(m, j).
DenseMatrix dense_P(const PatchGrid& grid);

/// Q as an N x (M n) matrix with entry 1/count(i) at (i, m n + j) for every
/// slot (m, j) whose footprint is pixel i.
DenseMatrix dense_Q(const PatchGrid& grid);

DenseMatrix transpose(const DenseMatrix& A);
DenseMatrix matmul(const DenseMatrix& A, const DenseMatrix& B);
std::vector<double> matvec(const DenseMatrix& A, const std::vector<double>& x);

/// Solves A x = b for symmetric positive definite A (dense Cholesky).
std::vector<double> solve_spd(const DenseMatrix& A, const std::vector<double>& b);

/// Largest singular value of A, estimated by power iteration on A^T A with
/// a fixed deterministic start and iteration count.
double operator_norm_2(const DenseMatrix& A);

/// z-update solved densely: forms Q^T Q + sigma^2 rho I explicitly and
/// factorizes it. Guarded by (M n)^2 <= 10^7 entries.
PatchStack direct_z_update(const PatchGrid& grid, const ImageBuffer& y,
                           const PatchStack& u, const PatchStack& d,
                           double sigma, double rho);

/// Plain proximal gradient (ISTA) on
///   F(z) = ||A z - y||^2 / (2 sigma^2) + sum_m xi(z_m),
/// with z partitioned into consecutive blocks of the prior's patch dim.
/// step <= sigma^2 / ||A||_2^2 guarantees monotone descent for convex
/// penalties; step = 0 requests that bound times a 0.95 safety factor.
/// Rejects priors that are not convex or lack an exact prox.
struct ProxGradProblem {
    const DenseMatrix* A = nullptr;
    std::vector<double> y;
    double sigma = 0.0;
    const PatchPrior* prior = nullptr;
    double step = 0.0;
    int iters = 1000;
};

struct ProxGradResult {
    std::vector<double> z;
    std::vector<double> objective_trace; // after each iteration
};

ProxGradResult proximal_gradient_reference(const ProxGradProblem& problem);

/// F(z) as used by proximal_gradient_reference.
double composite_objective(const DenseMatrix& A, const std::vector<double>& y,
                           double sigma, const PatchPrior& prior,
                           const std::vector<double>& z);

} // namespace psdn::oracle
