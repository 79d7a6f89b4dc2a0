#include "psdn/oracle.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "psdn/rng.hpp"

namespace psdn::oracle {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void guard_entries(std::int64_t rows, std::int64_t cols, const char* what)
{
    if (rows <= 0 || cols <= 0)
        throw std::invalid_argument(std::string(what) + ": empty matrix");
    if (rows > kMaxDenseEntries / cols)
        throw std::invalid_argument(std::string(what) + ": dense matrix would exceed " +
                                    std::to_string(kMaxDenseEntries) + " entries (" +
                                    std::to_string(rows) + " x " + std::to_string(cols) + ")");
}

} // namespace

DenseMatrix dense_P(const PatchGrid& grid)
{
    const std::int64_t rows = grid.stack_len();
    const std::int64_t cols = grid.num_pixels();
    guard_entries(rows, cols, "dense_P");
    DenseMatrix P(rows, cols);
    const int n = grid.patch_dim();
    for (std::int64_t m = 0; m < grid.num_patches; ++m)
        for (int j = 0; j < n; ++j)
            P.at(m * n + j, grid.footprint(m, j)) = 1.0;
    return P;
}

DenseMatrix dense_Q(const PatchGrid& grid)
{
    const std::int64_t rows = grid.num_pixels();
    const std::int64_t cols = grid.stack_len();
    guard_entries(rows, cols, "dense_Q");
    DenseMatrix Q(rows, cols);
    const int n = grid.patch_dim();
    for (std::int64_t m = 0; m < grid.num_patches; ++m)
        for (int j = 0; j < n; ++j) {
            const std::int32_t px = grid.footprint(m, j);
            Q.at(px, m * n + j) = 1.0 / grid.counts[static_cast<std::size_t>(px)];
        }
    return Q;
}

DenseMatrix transpose(const DenseMatrix& A)
{
    DenseMatrix T(A.cols, A.rows);
    for (std::int64_t r = 0; r < A.rows; ++r)
        for (std::int64_t c = 0; c < A.cols; ++c)
            T.at(c, r) = A.at(r, c);
    return T;
}

DenseMatrix matmul(const DenseMatrix& A, const DenseMatrix& B)
{
    if (A.cols != B.rows)
        throw std::invalid_argument("matmul: inner dimensions disagree");
    guard_entries(A.rows, B.cols, "matmul");
    DenseMatrix C(A.rows, B.cols);
    for (std::int64_t r = 0; r < A.rows; ++r)
        for (std::int64_t k = 0; k < A.cols; ++k) {
            const double a = A.at(r, k);
            if (a == 0.0)
                continue;
            for (std::int64_t c = 0; c < B.cols; ++c)
                C.at(r, c) += a * B.at(k, c);
        }
    return C;
}

std::vector<double> matvec(const DenseMatrix& A, const std::vector<double>& x)
{
    if (x.size() != static_cast<std::size_t>(A.cols))
        throw std::invalid_argument("matvec: length mismatch");
    std::vector<double> out(static_cast<std::size_t>(A.rows), 0.0);
    for (std::int64_t r = 0; r < A.rows; ++r) {
        double acc = 0.0;
        for (std::int64_t c = 0; c < A.cols; ++c)
            acc += A.at(r, c) * x[static_cast<std::size_t>(c)];
        out[static_cast<std::size_t>(r)] = acc;
    }
    return out;
}

std::vector<double> solve_spd(const DenseMatrix& A, const std::vector<double>& b)
{
    if (A.rows != A.cols || b.size() != static_cast<std::size_t>(A.rows))
        throw std::invalid_argument("solve_spd: shape mismatch");
    Eigen::Map<const RowMat> Am(A.data.data(), A.rows, A.cols);
    Eigen::Map<const Eigen::VectorXd> bm(b.data(), static_cast<Eigen::Index>(b.size()));
    Eigen::LLT<Eigen::MatrixXd> llt(Am);
    if (llt.info() != Eigen::Success)
        throw std::invalid_argument("solve_spd: matrix is not positive definite");
    Eigen::VectorXd x = llt.solve(bm);
    return std::vector<double>(x.data(), x.data() + x.size());
}

double operator_norm_2(const DenseMatrix& A)
{
    // Power iteration on A^T A from a fixed pseudorandom start.
    std::vector<double> v(static_cast<std::size_t>(A.cols));
    Rng rng(0x5eedULL);
    for (double& x : v)
        x = rng.normal();
    double norm = 0.0;
    for (int it = 0; it < 200; ++it) {
        const std::vector<double> av = matvec(A, v);
        std::vector<double> atav(static_cast<std::size_t>(A.cols), 0.0);
        for (std::int64_t r = 0; r < A.rows; ++r) {
            const double a = av[static_cast<std::size_t>(r)];
            if (a == 0.0)
                continue;
            for (std::int64_t c = 0; c < A.cols; ++c)
                atav[static_cast<std::size_t>(c)] += A.at(r, c) * a;
        }
        double len = 0.0;
        for (double x : atav)
            len += x * x;
        len = std::sqrt(len);
        if (len == 0.0)
            return 0.0;
        for (std::size_t i = 0; i < v.size(); ++i)
            v[i] = atav[i] / len;
        norm = std::sqrt(len);
    }
    return norm;
}

PatchStack direct_z_update(const PatchGrid& grid, const ImageBuffer& y,
                           const PatchStack& u, const PatchStack& d,
                           double sigma, double rho)
{
    if (!(sigma > 0.0) || !(rho > 0.0))
        throw std::invalid_argument("direct_z_update: sigma and rho must be > 0");
    require_stack(grid, u, "direct_z_update");
    require_stack(grid, d, "direct_z_update");
    const std::int64_t len = grid.stack_len();
    guard_entries(len, len, "direct_z_update");

    const DenseMatrix Q = dense_Q(grid);
    const DenseMatrix Qt = transpose(Q);
    DenseMatrix QtQ = matmul(Qt, Q);
    const double s2r = sigma * sigma * rho;
    for (std::int64_t i = 0; i < len; ++i)
        QtQ.at(i, i) += s2r;

    std::vector<double> rhs = matvec(Qt, y.data);
    for (std::int64_t k = 0; k < len; ++k)
        rhs[static_cast<std::size_t>(k)] += s2r * (u.data[static_cast<std::size_t>(k)] +
                                                   d.data[static_cast<std::size_t>(k)]);

    PatchStack z;
    z.grid = &grid;
    z.data = solve_spd(QtQ, rhs);
    return z;
}

double composite_objective(const DenseMatrix& A, const std::vector<double>& y,
                           double sigma, const PatchPrior& prior,
                           const std::vector<double>& z)
{
    const std::vector<double> az = matvec(A, z);
    double data = 0.0;
    for (std::size_t i = 0; i < az.size(); ++i) {
        const double r = az[i] - y[i];
        data += r * r;
    }
    data /= 2.0 * sigma * sigma;
    const int n = prior.patch_dim();
    double pen = 0.0;
    for (std::size_t m = 0; m < z.size() / static_cast<std::size_t>(n); ++m)
        pen += prior.negloglik(
            std::span<const double>(z.data() + m * static_cast<std::size_t>(n),
                                    static_cast<std::size_t>(n)));
    return data + pen;
}

ProxGradResult proximal_gradient_reference(const ProxGradProblem& problem)
{
    if (problem.A == nullptr || problem.prior == nullptr)
        throw std::invalid_argument("proximal_gradient_reference: A and prior are required");
    const DenseMatrix& A = *problem.A;
    const PatchPrior& prior = *problem.prior;
    if (!(problem.sigma > 0.0))
        throw std::invalid_argument("proximal_gradient_reference: sigma must be > 0");
    if (problem.iters < 1)
        throw std::invalid_argument("proximal_gradient_reference: iters must be >= 1");
    if (problem.y.size() != static_cast<std::size_t>(A.rows))
        throw std::invalid_argument("proximal_gradient_reference: y length mismatch");
    const int n = prior.patch_dim();
    if (A.cols % n != 0)
        throw std::invalid_argument("proximal_gradient_reference: cols not a multiple of patch dim");
    if (!prior.is_convex_neglog() || !prior.has_exact_prox())
        throw std::invalid_argument("proximal_gradient_reference: needs a convex prior with exact prox");

    const double s2 = problem.sigma * problem.sigma;
    double step = problem.step;
    const double norm = operator_norm_2(A);
    const double bound = norm > 0.0 ? s2 / (norm * norm) : 1.0;
    if (step == 0.0)
        step = 0.95 * bound;
    else if (!(step > 0.0) || step > bound * (1.0 + 1e-12))
        throw std::invalid_argument("proximal_gradient_reference: step must lie in (0, sigma^2/||A||_2^2]");

    const std::int64_t M = A.cols / n;
    ProxGradResult res;
    res.z.assign(static_cast<std::size_t>(A.cols), 0.0);
    std::vector<double> g(static_cast<std::size_t>(A.cols));
    std::vector<double> znext(static_cast<std::size_t>(A.cols));
    for (int it = 0; it < problem.iters; ++it) {
        const std::vector<double> az = matvec(A, res.z);
        std::vector<double> resid(az.size());
        for (std::size_t i = 0; i < az.size(); ++i)
            resid[i] = az[i] - problem.y[i];
        // gradient of the data term: A^T resid / sigma^2
        for (std::int64_t c = 0; c < A.cols; ++c)
            g[static_cast<std::size_t>(c)] = 0.0;
        for (std::int64_t r = 0; r < A.rows; ++r) {
            const double a = resid[static_cast<std::size_t>(r)];
            if (a == 0.0)
                continue;
            for (std::int64_t c = 0; c < A.cols; ++c)
                g[static_cast<std::size_t>(c)] += A.at(r, c) * a;
        }
        for (std::int64_t c = 0; c < A.cols; ++c)
            znext[static_cast<std::size_t>(c)] =
                res.z[static_cast<std::size_t>(c)] - step / s2 * g[static_cast<std::size_t>(c)];
        for (std::int64_t m = 0; m < M; ++m)
            prior.prox(std::span<const double>(znext.data() + m * n, static_cast<std::size_t>(n)),
                       step,
                       std::span<double>(res.z.data() + m * n, static_cast<std::size_t>(n)));
        res.objective_trace.push_back(
            composite_objective(A, problem.y, problem.sigma, prior, res.z));
    }
    return res;
}

} // namespace psdn::oracle
