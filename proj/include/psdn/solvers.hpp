#pragma once

#include <filesystem>
#include <vector>

#include "psdn/image.hpp"
#include "psdn/patch_grid.hpp"
#include "psdn/patch_ops.hpp"
#include "psdn/priors.hpp"

namespace psdn {

// Two ways to denoise y = x + noise with a patch prior xi on R^n.
//
// Synthesis: estimate a free patch stack z and read the image off as Q z,
//   min_z  ||Q z - y||^2 / (2 sigma^2) + sum_m xi(z_m).            (MAP-S)
// Analysis: estimate the image x and penalize its extracted patches,
//   min_x  ||x - y||^2 / (2 sigma^2) + sum_m xi(P_m x).            (MAP-A)
//
// Both are normalized to a 1/(2 sigma^2) data weight and a -sum log f
// penalty. A convention with data weight 1/sigma^2 and penalty -2 sum log f
// is the same objective scaled by two, so quadratic coupling weights
// (rho, beta) translate by that factor of two.

struct AdmmConfig {
    double rho = 0.0;      // quadratic coupling weight, > 0, fixed for the run
    int max_iter = 300;
    double tol_abs = 1e-6; // in (0, 1]
    double tol_rel = 1e-4; // in (0, 1]
    double sigma = 0.0;    // noise level, > 0

    /// rho = 1/sigma^2 plus the defaults above.
    static AdmmConfig defaults(double sigma);
};

struct HqsConfig {
    double beta_init = 0.0;   // > 0
    double beta_growth = 4.0; // > 1
    int betas_count = 6;      // schedule length, >= 1
    int inner_iters = 2;      // half-step pairs per beta, >= 1
    double sigma = 0.0;       // > 0

    /// beta_init = 1/sigma^2 plus the defaults above.
    static HqsConfig defaults(double sigma);
};

struct SolverResult {
    ImageBuffer x_hat;
    int iterations = 0;
    bool converged = false;
    // Set when the prior is not log-concave; residual-based stopping then
    // certifies a fixed point, not a global optimum.
    bool nonconvex_prior = false;

    std::vector<double> objective_trace;              // per iteration
    std::vector<double> primal_residual_trace;        // ADMM solvers
    std::vector<double> dual_residual_trace;          // ADMM solvers
    std::vector<double> smoothed_objective_trace;     // HQS: H_beta at (x, v)
    std::vector<double> beta_trace;                   // HQS: beta per iteration

    // Final iterates for diagnostics. Synthesis fills z, u, d; the analysis
    // solvers fill v. The stacks reference the caller's grid.
    PatchStack z, u, d, v;
};

double objective_synthesis(const PatchGrid& grid, const PatchPrior& prior,
                           const ImageBuffer& y, const PatchStack& z, double sigma);

double objective_analysis(const PatchGrid& grid, const PatchPrior& prior,
                          const ImageBuffer& y, const ImageBuffer& x, double sigma);

/// Exact minimizer of ||Q z - y||^2 / (2 sigma^2) + rho/2 ||z - u - d||^2,
/// i.e. z = (Q^T Q + sigma^2 rho I)^-1 (Q^T y + sigma^2 rho (u + d)).
/// Because Q Q^T is diagonal (overlapping patches never share a stack slot),
/// the Woodbury identity collapses the solve to
///   s = Q^T y + sigma^2 rho (u + d)
///   z = (s - Q^T (q .* Q s)) / (sigma^2 rho),  q_i = 1/(sigma^2 rho + 1/c_i),
/// which costs a few passes over the stack and never forms a matrix.
PatchStack synthesis_z_update(const PatchGrid& grid, const ImageBuffer& y,
                              const PatchStack& u, const PatchStack& d,
                              double sigma, double rho);

/// Scaled ADMM on MAP-S with splitting z = u:
///   z-update  as synthesis_z_update(y, u, d)
///   u-update  u_m = prox_{xi/rho}(z_m - d_m)
///   d-update  d += u - z
/// Stops when ||z - u||_2 <= sqrt(M n) tol_abs + tol_rel max(||z||, ||u||)
/// and rho ||u - u_prev||_2 <= sqrt(M n) tol_abs + tol_rel rho ||d||.
/// Initialization: z = u = extract(y), d = 0. Returns x_hat = Q z.
SolverResult denoise_synthesis_admm(const ImageBuffer& y, const PatchGrid& grid,
                                    const PatchPrior& prior, const AdmmConfig& cfg);

/// Half-quadratic splitting on MAP-A. For each beta in the schedule, repeat
/// inner_iters times:
///   v-update  v_m = prox_{xi/beta}(P_m x)
///   x-update  x_i = (y_i/sigma^2 + beta (P^T v)_i) / (1/sigma^2 + beta c_i)
/// using sum_m P_m^T P_m = diag(counts). The smoothed objective
///   H_beta(x, v) = ||y - x||^2/(2 sigma^2) + beta/2 sum ||v_m - P_m x||^2
///                  + sum xi(v_m)
/// is recorded after every iteration; each half-step minimizes it exactly,
/// so within one beta stage the trace never increases.
SolverResult denoise_analysis_hqs(const ImageBuffer& y, const PatchGrid& grid,
                                  const PatchPrior& prior, const HqsConfig& cfg);

/// Scaled ADMM on MAP-A with splitting v = P x:
///   x-update  x_i = (y_i/sigma^2 + rho (P^T (v - d))_i) / (1/sigma^2 + rho c_i)
///   v-update  v_m = prox_{xi/rho}(P_m x + d_m)
///   d-update  d += P x - v
/// Convergence to the global optimum is guaranteed for convex penalties
/// only; for others the result flags nonconvex_prior.
SolverResult denoise_analysis_admm(const ImageBuffer& y, const PatchGrid& grid,
                                   const PatchPrior& prior, const AdmmConfig& cfg);

/// Plain-text trace: a comment header, then one line per iteration
/// "iter objective primal_residual dual_residual" (nan where a solver has no
/// such quantity). Written via a temporary file and an atomic rename.
void write_trace(const std::filesystem::path& path, const SolverResult& result);

} // namespace psdn
