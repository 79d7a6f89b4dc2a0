#include "psdn/solvers.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>

#include "psdn/errors.hpp"

namespace psdn {

namespace {

void require_admm(const AdmmConfig& cfg)
{
    if (!(cfg.rho > 0.0))
        throw std::invalid_argument("AdmmConfig: rho must be > 0");
    if (cfg.max_iter < 1)
        throw std::invalid_argument("AdmmConfig: max_iter must be >= 1");
    if (!(cfg.tol_abs > 0.0) || cfg.tol_abs > 1.0 || !(cfg.tol_rel > 0.0) || cfg.tol_rel > 1.0)
        throw std::invalid_argument("AdmmConfig: tolerances must lie in (0, 1]");
    if (!(cfg.sigma > 0.0))
        throw std::invalid_argument("AdmmConfig: sigma must be > 0");
}

void require_hqs(const HqsConfig& cfg)
{
    if (!(cfg.beta_init > 0.0))
        throw std::invalid_argument("HqsConfig: beta_init must be > 0");
    if (!(cfg.beta_growth > 1.0))
        throw std::invalid_argument("HqsConfig: beta_growth must be > 1");
    if (cfg.betas_count < 1 || cfg.inner_iters < 1)
        throw std::invalid_argument("HqsConfig: schedule lengths must be >= 1");
    if (!(cfg.sigma > 0.0))
        throw std::invalid_argument("HqsConfig: sigma must be > 0");
}

void require_input(const PatchGrid& grid, const ImageBuffer& y, const char* what)
{
    require_valid(y, what);
    if (y.height != grid.image_height || y.width != grid.image_width)
        throw std::invalid_argument(std::string(what) + ": image does not match grid");
}

bool all_finite(const std::vector<double>& xs)
{
    for (double x : xs)
        if (!std::isfinite(x))
            return false;
    return true;
}

// Deterministic squared norm: fixed-size blocks are summed in index order
// and then combined serially, so the value does not depend on threading.
double det_sqnorm(const double* x, std::int64_t len)
{
    constexpr std::int64_t kBlock = 4096;
    const std::int64_t nblocks = (len + kBlock - 1) / kBlock;
    std::vector<double> partial(static_cast<std::size_t>(nblocks), 0.0);
#pragma omp parallel for schedule(static)
    for (std::int64_t b = 0; b < nblocks; ++b) {
        const std::int64_t lo = b * kBlock;
        const std::int64_t hi = std::min(len, lo + kBlock);
        double acc = 0.0;
        for (std::int64_t i = lo; i < hi; ++i)
            acc += x[i] * x[i];
        partial[static_cast<std::size_t>(b)] = acc;
    }
    double acc = 0.0;
    for (double p : partial)
        acc += p;
    return acc;
}

double det_sqdiff(const double* a, const double* b, std::int64_t len)
{
    constexpr std::int64_t kBlock = 4096;
    const std::int64_t nblocks = (len + kBlock - 1) / kBlock;
    std::vector<double> partial(static_cast<std::size_t>(nblocks), 0.0);
#pragma omp parallel for schedule(static)
    for (std::int64_t blk = 0; blk < nblocks; ++blk) {
        const std::int64_t lo = blk * kBlock;
        const std::int64_t hi = std::min(len, lo + kBlock);
        double acc = 0.0;
        for (std::int64_t i = lo; i < hi; ++i) {
            const double d = a[i] - b[i];
            acc += d * d;
        }
        partial[static_cast<std::size_t>(blk)] = acc;
    }
    double acc = 0.0;
    for (double p : partial)
        acc += p;
    return acc;
}

// Per-patch prox over a stack. Patch 0 runs first on its own so that any
// lazy per-step setup (and its potential failure) happens outside the
// parallel region.
void stack_prox(const PatchPrior& prior, const PatchStack& in, double t, PatchStack& out)
{
    const int n = prior.patch_dim();
    const std::int64_t M = static_cast<std::int64_t>(in.data.size()) / n;
    const double* src = in.data.data();
    double* dst = out.data.data();
    prior.prox(std::span<const double>(src, static_cast<std::size_t>(n)), t,
               std::span<double>(dst, static_cast<std::size_t>(n)));
#pragma omp parallel for schedule(static)
    for (std::int64_t m = 1; m < M; ++m) {
        const std::size_t base = static_cast<std::size_t>(m) * n;
        prior.prox(std::span<const double>(src + base, static_cast<std::size_t>(n)), t,
                   std::span<double>(dst + base, static_cast<std::size_t>(n)));
    }
}

// sum_m xi(stack_m), summed serially in patch order.
double stack_negloglik(const PatchPrior& prior, const PatchStack& stack)
{
    const int n = prior.patch_dim();
    const std::int64_t M = static_cast<std::int64_t>(stack.data.size()) / n;
    const double* src = stack.data.data();
    std::vector<double> per_patch(static_cast<std::size_t>(M));
    per_patch[0] = prior.negloglik(std::span<const double>(src, static_cast<std::size_t>(n)));
#pragma omp parallel for schedule(static)
    for (std::int64_t m = 1; m < M; ++m)
        per_patch[static_cast<std::size_t>(m)] = prior.negloglik(std::span<const double>(
            src + static_cast<std::size_t>(m) * n, static_cast<std::size_t>(n)));
    double acc = 0.0;
    for (double v : per_patch)
        acc += v;
    return acc;
}

void require_prior_grid(const PatchGrid& grid, const PatchPrior& prior, const char* what)
{
    if (prior.patch_dim() != grid.patch_dim())
        throw std::invalid_argument(std::string(what) + ": prior patch dim " +
                                    std::to_string(prior.patch_dim()) +
                                    " does not match grid patch dim " +
                                    std::to_string(grid.patch_dim()));
}

} // namespace

AdmmConfig AdmmConfig::defaults(double sigma)
{
    AdmmConfig cfg;
    cfg.sigma = sigma;
    cfg.rho = 1.0 / (sigma * sigma);
    return cfg;
}

HqsConfig HqsConfig::defaults(double sigma)
{
    HqsConfig cfg;
    cfg.sigma = sigma;
    cfg.beta_init = 1.0 / (sigma * sigma);
    return cfg;
}

double objective_synthesis(const PatchGrid& grid, const PatchPrior& prior,
                           const ImageBuffer& y, const PatchStack& z, double sigma)
{
    require_input(grid, y, "objective_synthesis");
    require_stack(grid, z, "objective_synthesis");
    require_prior_grid(grid, prior, "objective_synthesis");
    if (!(sigma > 0.0))
        throw std::invalid_argument("objective_synthesis: sigma must be > 0");
    const ImageBuffer qz = synthesize(grid, z);
    const double data = det_sqdiff(qz.data.data(), y.data.data(), grid.num_pixels());
    return data / (2.0 * sigma * sigma) + stack_negloglik(prior, z);
}

double objective_analysis(const PatchGrid& grid, const PatchPrior& prior,
                          const ImageBuffer& y, const ImageBuffer& x, double sigma)
{
    require_input(grid, y, "objective_analysis");
    require_input(grid, x, "objective_analysis");
    require_prior_grid(grid, prior, "objective_analysis");
    if (!(sigma > 0.0))
        throw std::invalid_argument("objective_analysis: sigma must be > 0");
    const double data = det_sqdiff(x.data.data(), y.data.data(), grid.num_pixels());
    const PatchStack px = extract(grid, x);
    return data / (2.0 * sigma * sigma) + stack_negloglik(prior, px);
}

PatchStack synthesis_z_update(const PatchGrid& grid, const ImageBuffer& y,
                              const PatchStack& u, const PatchStack& d,
                              double sigma, double rho)
{
    require_input(grid, y, "synthesis_z_update");
    require_stack(grid, u, "synthesis_z_update");
    require_stack(grid, d, "synthesis_z_update");
    if (!(sigma > 0.0) || !(rho > 0.0))
        throw std::invalid_argument("synthesis_z_update: sigma and rho must be > 0");

    const double s2r = sigma * sigma * rho;
    const std::int64_t len = grid.stack_len();
    const std::int64_t N = grid.num_pixels();

    PatchStack s = synthesize_adjoint(grid, y);
    {
        double* sd = s.data.data();
        const double* ud = u.data.data();
        const double* dd = d.data.data();
#pragma omp parallel for schedule(static)
        for (std::int64_t k = 0; k < len; ++k)
            sd[k] += s2r * (ud[k] + dd[k]);
    }

    ImageBuffer qs = synthesize(grid, s);
    {
        double* q = qs.data.data();
        const std::int32_t* counts = grid.counts.data();
#pragma omp parallel for schedule(static)
        for (std::int64_t i = 0; i < N; ++i)
            q[i] /= s2r + 1.0 / counts[i];
    }

    PatchStack corr = synthesize_adjoint(grid, qs);
    PatchStack z;
    z.grid = &grid;
    z.data.resize(static_cast<std::size_t>(len));
    {
        double* zd = z.data.data();
        const double* sd = s.data.data();
        const double* cd = corr.data.data();
#pragma omp parallel for schedule(static)
        for (std::int64_t k = 0; k < len; ++k)
            zd[k] = (sd[k] - cd[k]) / s2r;
    }
    return z;
}

SolverResult denoise_synthesis_admm(const ImageBuffer& y, const PatchGrid& grid,
                                    const PatchPrior& prior, const AdmmConfig& cfg)
{
    require_admm(cfg);
    require_input(grid, y, "denoise_synthesis_admm");
    require_prior_grid(grid, prior, "denoise_synthesis_admm");

    const std::int64_t len = grid.stack_len();
    const double sqrt_len = std::sqrt(static_cast<double>(len));

    SolverResult res;
    res.nonconvex_prior = !prior.is_convex_neglog();
    res.z = extract(grid, y);
    res.u = res.z;
    res.d = zeros_like(grid);

    PatchStack w = zeros_like(grid);       // prox argument z - d
    PatchStack u_prev = zeros_like(grid);

    for (int it = 1; it <= cfg.max_iter; ++it) {
        res.z = synthesis_z_update(grid, y, res.u, res.d, cfg.sigma, cfg.rho);
        if (!all_finite(res.z.data))
            throw divergence_error("denoise_synthesis_admm: non-finite z iterate at iteration " +
                                       std::to_string(it), it);

        {
            const double* zd = res.z.data.data();
            const double* dd = res.d.data.data();
            double* wd = w.data.data();
#pragma omp parallel for schedule(static)
            for (std::int64_t k = 0; k < len; ++k)
                wd[k] = zd[k] - dd[k];
        }
        std::swap(res.u, u_prev);
        stack_prox(prior, w, 1.0 / cfg.rho, res.u);
        if (!all_finite(res.u.data))
            throw divergence_error("denoise_synthesis_admm: non-finite u iterate at iteration " +
                                       std::to_string(it), it);

        {
            double* dd = res.d.data.data();
            const double* ud = res.u.data.data();
            const double* zd = res.z.data.data();
#pragma omp parallel for schedule(static)
            for (std::int64_t k = 0; k < len; ++k)
                dd[k] += ud[k] - zd[k];
        }

        const double r_norm = std::sqrt(det_sqdiff(res.z.data.data(), res.u.data.data(), len));
        const double s_norm = cfg.rho * std::sqrt(det_sqdiff(res.u.data.data(), u_prev.data.data(), len));
        const double eps_pri = sqrt_len * cfg.tol_abs +
                               cfg.tol_rel * std::max(std::sqrt(det_sqnorm(res.z.data.data(), len)),
                                                      std::sqrt(det_sqnorm(res.u.data.data(), len)));
        const double eps_dual = sqrt_len * cfg.tol_abs +
                                cfg.tol_rel * cfg.rho * std::sqrt(det_sqnorm(res.d.data.data(), len));

        res.objective_trace.push_back(objective_synthesis(grid, prior, y, res.z, cfg.sigma));
        res.primal_residual_trace.push_back(r_norm);
        res.dual_residual_trace.push_back(s_norm);
        res.iterations = it;

        if (r_norm <= eps_pri && s_norm <= eps_dual) {
            res.converged = true;
            break;
        }
    }

    res.x_hat = synthesize(grid, res.z);
    return res;
}

SolverResult denoise_analysis_hqs(const ImageBuffer& y, const PatchGrid& grid,
                                  const PatchPrior& prior, const HqsConfig& cfg)
{
    require_hqs(cfg);
    require_input(grid, y, "denoise_analysis_hqs");
    require_prior_grid(grid, prior, "denoise_analysis_hqs");

    const std::int64_t N = grid.num_pixels();
    const std::int64_t len = grid.stack_len();
    const double inv_s2 = 1.0 / (cfg.sigma * cfg.sigma);

    SolverResult res;
    res.nonconvex_prior = !prior.is_convex_neglog();
    res.x_hat = y;
    res.v = extract(grid, y);

    PatchStack px = extract(grid, y);
    double beta = cfg.beta_init;
    for (int stage = 0; stage < cfg.betas_count; ++stage) {
        for (int inner = 0; inner < cfg.inner_iters; ++inner) {
            stack_prox(prior, px, 1.0 / beta, res.v);
            if (!all_finite(res.v.data))
                throw divergence_error("denoise_analysis_hqs: non-finite v iterate at iteration " +
                                           std::to_string(res.iterations + 1),
                                       res.iterations + 1);

            const ImageBuffer ptv = extract_adjoint(grid, res.v);
            {
                double* xd = res.x_hat.data.data();
                const double* yd = y.data.data();
                const double* pd = ptv.data.data();
                const std::int32_t* counts = grid.counts.data();
#pragma omp parallel for schedule(static)
                for (std::int64_t i = 0; i < N; ++i)
                    xd[i] = (yd[i] * inv_s2 + beta * pd[i]) / (inv_s2 + beta * counts[i]);
            }
            if (!all_finite(res.x_hat.data))
                throw divergence_error("denoise_analysis_hqs: non-finite x iterate at iteration " +
                                           std::to_string(res.iterations + 1),
                                       res.iterations + 1);

            px = extract(grid, res.x_hat);
            const double data = det_sqdiff(res.x_hat.data.data(), y.data.data(), N);
            const double couple = det_sqdiff(res.v.data.data(), px.data.data(), len);
            const double prior_sum = stack_negloglik(prior, res.v);
            res.smoothed_objective_trace.push_back(data * inv_s2 / 2.0 +
                                                   beta / 2.0 * couple + prior_sum);
            res.objective_trace.push_back(data * inv_s2 / 2.0 + stack_negloglik(prior, px));
            res.beta_trace.push_back(beta);
            ++res.iterations;
        }
        beta *= cfg.beta_growth;
    }

    res.converged = true; // fixed schedule, finite iterates throughout
    return res;
}

SolverResult denoise_analysis_admm(const ImageBuffer& y, const PatchGrid& grid,
                                   const PatchPrior& prior, const AdmmConfig& cfg)
{
    require_admm(cfg);
    require_input(grid, y, "denoise_analysis_admm");
    require_prior_grid(grid, prior, "denoise_analysis_admm");

    const std::int64_t N = grid.num_pixels();
    const std::int64_t len = grid.stack_len();
    const double sqrt_len = std::sqrt(static_cast<double>(len));
    const double sqrt_n_pix = std::sqrt(static_cast<double>(N));
    const double inv_s2 = 1.0 / (cfg.sigma * cfg.sigma);

    SolverResult res;
    res.nonconvex_prior = !prior.is_convex_neglog();
    res.x_hat = y;
    res.v = extract(grid, y);
    res.d = zeros_like(grid);

    PatchStack w = zeros_like(grid); // prox argument P x + d
    PatchStack v_prev = zeros_like(grid);
    PatchStack vd = zeros_like(grid); // v - d

    for (int it = 1; it <= cfg.max_iter; ++it) {
        {
            const double* vv = res.v.data.data();
            const double* dd = res.d.data.data();
            double* o = vd.data.data();
#pragma omp parallel for schedule(static)
            for (std::int64_t k = 0; k < len; ++k)
                o[k] = vv[k] - dd[k];
        }
        const ImageBuffer pt_vd = extract_adjoint(grid, vd);
        {
            double* xd = res.x_hat.data.data();
            const double* yd = y.data.data();
            const double* pd = pt_vd.data.data();
            const std::int32_t* counts = grid.counts.data();
#pragma omp parallel for schedule(static)
            for (std::int64_t i = 0; i < N; ++i)
                xd[i] = (yd[i] * inv_s2 + cfg.rho * pd[i]) / (inv_s2 + cfg.rho * counts[i]);
        }
        if (!all_finite(res.x_hat.data))
            throw divergence_error("denoise_analysis_admm: non-finite x iterate at iteration " +
                                       std::to_string(it), it);

        const PatchStack px = extract(grid, res.x_hat);
        {
            const double* pd = px.data.data();
            const double* dd = res.d.data.data();
            double* wd = w.data.data();
#pragma omp parallel for schedule(static)
            for (std::int64_t k = 0; k < len; ++k)
                wd[k] = pd[k] + dd[k];
        }
        std::swap(res.v, v_prev);
        stack_prox(prior, w, 1.0 / cfg.rho, res.v);
        if (!all_finite(res.v.data))
            throw divergence_error("denoise_analysis_admm: non-finite v iterate at iteration " +
                                       std::to_string(it), it);

        {
            double* dd = res.d.data.data();
            const double* pd = px.data.data();
            const double* vv = res.v.data.data();
#pragma omp parallel for schedule(static)
            for (std::int64_t k = 0; k < len; ++k)
                dd[k] += pd[k] - vv[k];
        }

        // Dual residual rho ||P^T (v - v_prev)|| needs the adjoint through
        // the pixel domain; reuse vd as scratch for the difference.
        {
            const double* a = res.v.data.data();
            const double* b = v_prev.data.data();
            double* o = vd.data.data();
#pragma omp parallel for schedule(static)
            for (std::int64_t k = 0; k < len; ++k)
                o[k] = a[k] - b[k];
        }
        const ImageBuffer pt_dv = extract_adjoint(grid, vd);
        const ImageBuffer pt_d = extract_adjoint(grid, res.d);

        const double r_norm = std::sqrt(det_sqdiff(px.data.data(), res.v.data.data(), len));
        const double s_norm = cfg.rho * std::sqrt(det_sqnorm(pt_dv.data.data(), N));
        const double eps_pri = sqrt_len * cfg.tol_abs +
                               cfg.tol_rel * std::max(std::sqrt(det_sqnorm(px.data.data(), len)),
                                                      std::sqrt(det_sqnorm(res.v.data.data(), len)));
        const double eps_dual = sqrt_n_pix * cfg.tol_abs +
                                cfg.tol_rel * cfg.rho * std::sqrt(det_sqnorm(pt_d.data.data(), N));

        res.objective_trace.push_back(objective_analysis(grid, prior, y, res.x_hat, cfg.sigma));
        res.primal_residual_trace.push_back(r_norm);
        res.dual_residual_trace.push_back(s_norm);
        res.iterations = it;

        if (r_norm <= eps_pri && s_norm <= eps_dual) {
            res.converged = true;
            break;
        }
    }
    return res;
}

void write_trace(const std::filesystem::path& path, const SolverResult& result)
{
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out)
            throw io_error("cannot open for writing: " + tmp.string());
        out << "# iter objective primal_residual dual_residual\n";
        char line[160];
        for (int i = 0; i < result.iterations; ++i) {
            const double obj = i < static_cast<int>(result.objective_trace.size())
                                   ? result.objective_trace[static_cast<std::size_t>(i)]
                                   : std::nan("");
            const double pr = i < static_cast<int>(result.primal_residual_trace.size())
                                  ? result.primal_residual_trace[static_cast<std::size_t>(i)]
                                  : std::nan("");
            const double du = i < static_cast<int>(result.dual_residual_trace.size())
                                  ? result.dual_residual_trace[static_cast<std::size_t>(i)]
                                  : std::nan("");
            std::snprintf(line, sizeof line, "%d %.17g %.17g %.17g\n", i + 1, obj, pr, du);
            out << line;
        }
        out.flush();
        if (!out)
            throw io_error("write failed: " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec)
        throw io_error("rename failed: " + path.string() + " (" + ec.message() + ")");
}

} // namespace psdn
