#include "psdn/priors.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "psdn/dct.hpp"
#include "psdn/errors.hpp"
#include "psdn/rng.hpp"

namespace psdn {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<const RowMat>;
using MapVec = Eigen::Map<const Eigen::VectorXd>;

// ---------------------------------------------------------------- PatchPrior

PatchPrior::PatchPrior(int n, bool exact_prox, bool convex, bool sampleable)
    : n_(n), exact_prox_(exact_prox), convex_(convex), sampleable_(sampleable)
{
    if (n < 1)
        throw std::invalid_argument("PatchPrior: patch dim must be >= 1");
}

double PatchPrior::negloglik(std::span<const double> u) const
{
    if (u.size() != static_cast<std::size_t>(n_))
        throw std::invalid_argument("negloglik: wrong patch length");
    for (double x : u)
        if (!std::isfinite(x))
            throw std::invalid_argument("negloglik: non-finite input");
    return do_negloglik(u);
}

void PatchPrior::prox(std::span<const double> v, double t, std::span<double> out) const
{
    if (v.size() != static_cast<std::size_t>(n_) || out.size() != static_cast<std::size_t>(n_))
        throw std::invalid_argument("prox: wrong patch length");
    if (!(t > 0.0))
        throw std::invalid_argument("prox: step t must be > 0");
    do_prox(v, t, out);
}

std::vector<double> PatchPrior::prox(std::span<const double> v, double t) const
{
    std::vector<double> out(static_cast<std::size_t>(n_));
    prox(v, t, std::span<double>(out));
    return out;
}

void PatchPrior::sample(std::uint64_t seed, std::span<double> out) const
{
    if (!sampleable_)
        throw capability_error("sample: this prior has no proper density to sample");
    if (out.size() != static_cast<std::size_t>(n_))
        throw std::invalid_argument("sample: wrong patch length");
    do_sample(seed, out);
}

std::vector<double> PatchPrior::sample(std::uint64_t seed) const
{
    std::vector<double> out(static_cast<std::size_t>(patch_dim()));
    sample(seed, std::span<double>(out));
    return out;
}

// ------------------------------------------------------------------- L1Prior

L1Prior::L1Prior(int n, double lambda)
    : PatchPrior(n, true, true, true), lambda_(lambda)
{
    if (!(lambda > 0.0))
        throw std::invalid_argument("L1Prior: lambda must be > 0");
}

double L1Prior::do_negloglik(std::span<const double> u) const
{
    double acc = 0.0;
    for (double x : u)
        acc += std::abs(x);
    return lambda_ * acc;
}

void L1Prior::do_prox(std::span<const double> v, double t, std::span<double> out) const
{
    const double thr = lambda_ * t;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double x = v[i];
        out[i] = x > thr ? x - thr : (x < -thr ? x + thr : 0.0);
    }
}

void L1Prior::do_sample(std::uint64_t seed, std::span<double> out) const
{
    Rng rng(seed);
    for (double& x : out)
        x = rng.laplace(1.0 / lambda_);
}

// ------------------------------------------------------------------ L2SqPrior

L2SqPrior::L2SqPrior(int n, double lambda)
    : PatchPrior(n, true, true, true), lambda_(lambda)
{
    if (!(lambda > 0.0))
        throw std::invalid_argument("L2SqPrior: lambda must be > 0");
}

double L2SqPrior::do_negloglik(std::span<const double> u) const
{
    double acc = 0.0;
    for (double x : u)
        acc += x * x;
    return lambda_ * acc;
}

void L2SqPrior::do_prox(std::span<const double> v, double t, std::span<double> out) const
{
    const double s = 1.0 / (1.0 + 2.0 * lambda_ * t);
    for (std::size_t i = 0; i < v.size(); ++i)
        out[i] = s * v[i];
}

void L2SqPrior::do_sample(std::uint64_t seed, std::span<double> out) const
{
    Rng rng(seed);
    const double sd = std::sqrt(1.0 / (2.0 * lambda_));
    for (double& x : out)
        x = sd * rng.normal();
}

// --------------------------------------------------- AnalysisTransformPrior

AnalysisTransformPrior::AnalysisTransformPrior(std::vector<double> B, int n,
                                               InnerPenalty inner, double lambda,
                                               bool penalize_dc)
    : PatchPrior(n, true, true, penalize_dc),
      B_(std::move(B)), inner_(inner), lambda_(lambda), penalize_dc_(penalize_dc)
{
    if (!(lambda > 0.0))
        throw std::invalid_argument("AnalysisTransformPrior: lambda must be > 0");
    if (B_.size() != static_cast<std::size_t>(n) * n)
        throw std::invalid_argument("AnalysisTransformPrior: B must be n x n");
    MapMat Bm(B_.data(), n, n);
    const double err = (Bm.transpose() * Bm - RowMat::Identity(n, n)).cwiseAbs().maxCoeff();
    if (!(err <= 1e-10))
        throw std::invalid_argument("AnalysisTransformPrior: B is not orthonormal (||B^T B - I||_max = " +
                                    std::to_string(err) + ")");
}

AnalysisTransformPrior AnalysisTransformPrior::identity(int n, InnerPenalty inner,
                                                        double lambda, bool penalize_dc)
{
    std::vector<double> I(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i)
        I[static_cast<std::size_t>(i) * n + i] = 1.0;
    return AnalysisTransformPrior(std::move(I), n, inner, lambda, penalize_dc);
}

AnalysisTransformPrior AnalysisTransformPrior::dct(int patch_height, int patch_width,
                                                   InnerPenalty inner, double lambda,
                                                   bool penalize_dc)
{
    return AnalysisTransformPrior(dct2_matrix_2d(patch_height, patch_width),
                                  patch_height * patch_width, inner, lambda, penalize_dc);
}

void AnalysisTransformPrior::apply(std::span<const double> x, std::span<double> out,
                                   bool transpose) const
{
    const int n = patch_dim();
    for (int k = 0; k < n; ++k) {
        double acc = 0.0;
        for (int i = 0; i < n; ++i)
            acc += (transpose ? B_[static_cast<std::size_t>(i) * n + k]
                              : B_[static_cast<std::size_t>(k) * n + i]) * x[i];
        out[k] = acc;
    }
}

double AnalysisTransformPrior::do_negloglik(std::span<const double> u) const
{
    const int n = patch_dim();
    std::vector<double> w(static_cast<std::size_t>(n));
    apply(u, w, false);
    double acc = 0.0;
    for (int k = penalize_dc_ ? 0 : 1; k < n; ++k)
        acc += inner_ == InnerPenalty::l1 ? std::abs(w[static_cast<std::size_t>(k)])
                                          : w[static_cast<std::size_t>(k)] * w[static_cast<std::size_t>(k)];
    return lambda_ * acc;
}

void AnalysisTransformPrior::do_prox(std::span<const double> v, double t,
                                     std::span<double> out) const
{
    const int n = patch_dim();
    std::vector<double> w(static_cast<std::size_t>(n));
    apply(v, w, false);
    const double thr = lambda_ * t;
    const double shrink = 1.0 / (1.0 + 2.0 * lambda_ * t);
    for (int k = penalize_dc_ ? 0 : 1; k < n; ++k) {
        double& x = w[static_cast<std::size_t>(k)];
        if (inner_ == InnerPenalty::l1)
            x = x > thr ? x - thr : (x < -thr ? x + thr : 0.0);
        else
            x *= shrink;
    }
    apply(w, out, true);
}

void AnalysisTransformPrior::do_sample(std::uint64_t seed, std::span<double> out) const
{
    const int n = patch_dim();
    Rng rng(seed);
    std::vector<double> w(static_cast<std::size_t>(n));
    if (inner_ == InnerPenalty::l1) {
        const double scale = 1.0 / lambda_;
        for (double& x : w)
            x = rng.laplace(scale);
    } else {
        const double sd = std::sqrt(1.0 / (2.0 * lambda_));
        for (double& x : w)
            x = sd * rng.normal();
    }
    apply(w, out, true);
}

// -------------------------------------------------------------------- GmmPrior

struct GmmPrior::ShiftedCache {
    std::vector<double> chol;     // K*n*n lower factors of Sigma_k + t I
    std::vector<double> log_norm; // K
};

namespace {

// Lower-triangular forward substitution: solves L z = b in place.
void forward_subst(const double* L, int n, double* z)
{
    for (int i = 0; i < n; ++i) {
        double acc = z[i];
        for (int j = 0; j < i; ++j)
            acc -= L[static_cast<std::size_t>(i) * n + j] * z[j];
        z[i] = acc / L[static_cast<std::size_t>(i) * n + i];
    }
}

// L^T z = b in place.
void backward_subst(const double* L, int n, double* z)
{
    for (int i = n - 1; i >= 0; --i) {
        double acc = z[i];
        for (int j = i + 1; j < n; ++j)
            acc -= L[static_cast<std::size_t>(j) * n + i] * z[j];
        z[i] = acc / L[static_cast<std::size_t>(i) * n + i];
    }
}

double chol_log_norm(const double* L, int n)
{
    double logdet = 0.0;
    for (int i = 0; i < n; ++i)
        logdet += std::log(L[static_cast<std::size_t>(i) * n + i]);
    // log det Sigma = 2 sum log diag L
    return -0.5 * n * std::log(2.0 * std::numbers::pi) - logdet;
}

// Cholesky of one row-major SPD matrix; throws invalid_argument when the
// matrix is not SPD.
std::vector<double> spd_cholesky(const double* S, int n, const char* what)
{
    MapMat Sm(S, n, n);
    const double scale = 1.0 + Sm.cwiseAbs().maxCoeff();
    if ((Sm - Sm.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale)
        throw std::invalid_argument(std::string(what) + ": covariance is not symmetric");
    Eigen::LLT<Eigen::MatrixXd> llt(Sm);
    if (llt.info() != Eigen::Success)
        throw std::invalid_argument(std::string(what) + ": covariance is not positive definite");
    Eigen::MatrixXd L = llt.matrixL();
    std::vector<double> out(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j <= i; ++j)
            out[static_cast<std::size_t>(i) * n + j] = L(i, j);
    return out;
}

} // namespace

GmmPrior::GmmPrior(int n, std::vector<double> weights, std::vector<double> means,
                   std::vector<double> covariances)
    : PatchPrior(n, false, false, true),
      K_(static_cast<int>(weights.size())),
      weights_(std::move(weights)), means_(std::move(means)), covs_(std::move(covariances))
{
    if (K_ < 1)
        throw std::invalid_argument("GmmPrior: need at least one component");
    if (means_.size() != static_cast<std::size_t>(K_) * n)
        throw std::invalid_argument("GmmPrior: means must be K*n");
    if (covs_.size() != static_cast<std::size_t>(K_) * n * n)
        throw std::invalid_argument("GmmPrior: covariances must be K*n*n");

    double wsum = 0.0;
    for (double w : weights_) {
        if (!(w >= 0.0))
            throw std::invalid_argument("GmmPrior: negative component weight");
        wsum += w;
    }
    if (std::abs(wsum - 1.0) > 1e-12)
        throw std::invalid_argument("GmmPrior: weights must sum to 1 (got " +
                                    std::to_string(wsum) + ")");
    for (double v : means_)
        if (!std::isfinite(v))
            throw std::invalid_argument("GmmPrior: non-finite mean entry");
    for (double v : covs_)
        if (!std::isfinite(v))
            throw std::invalid_argument("GmmPrior: non-finite covariance entry");

    log_weights_.resize(static_cast<std::size_t>(K_));
    for (int k = 0; k < K_; ++k)
        log_weights_[static_cast<std::size_t>(k)] =
            weights_[static_cast<std::size_t>(k)] > 0.0
                ? std::log(weights_[static_cast<std::size_t>(k)])
                : -std::numeric_limits<double>::infinity();

    chol_.resize(covs_.size());
    log_norm_.resize(static_cast<std::size_t>(K_));
    const std::size_t nn = static_cast<std::size_t>(n) * n;
    for (int k = 0; k < K_; ++k) {
        const std::vector<double> L = spd_cholesky(covs_.data() + k * nn, n, "GmmPrior");
        std::copy(L.begin(), L.end(), chol_.begin() + k * nn);
        log_norm_[static_cast<std::size_t>(k)] = chol_log_norm(L.data(), n);
    }
}

std::span<const double> GmmPrior::mean(int k) const
{
    return {means_.data() + static_cast<std::size_t>(k) * patch_dim(),
            static_cast<std::size_t>(patch_dim())};
}

std::span<const double> GmmPrior::covariance(int k) const
{
    const std::size_t nn = static_cast<std::size_t>(patch_dim()) * patch_dim();
    return {covs_.data() + static_cast<std::size_t>(k) * nn, nn};
}

double GmmPrior::do_negloglik(std::span<const double> u) const
{
    const int n = patch_dim();
    const std::size_t nn = static_cast<std::size_t>(n) * n;
    std::vector<double> z(static_cast<std::size_t>(n));
    double best = -std::numeric_limits<double>::infinity();
    std::vector<double> logp(static_cast<std::size_t>(K_));
    for (int k = 0; k < K_; ++k) {
        for (int i = 0; i < n; ++i)
            z[static_cast<std::size_t>(i)] = u[static_cast<std::size_t>(i)] -
                                             means_[static_cast<std::size_t>(k) * n + i];
        forward_subst(chol_.data() + k * nn, n, z.data());
        double quad = 0.0;
        for (double x : z)
            quad += x * x;
        logp[static_cast<std::size_t>(k)] =
            log_weights_[static_cast<std::size_t>(k)] +
            log_norm_[static_cast<std::size_t>(k)] - 0.5 * quad;
        best = std::max(best, logp[static_cast<std::size_t>(k)]);
    }
    // log-sum-exp anchored at the best component for stability
    double acc = 0.0;
    for (double lp : logp)
        acc += std::exp(lp - best);
    return -(best + std::log(acc));
}

const GmmPrior::ShiftedCache& GmmPrior::shifted(double t) const
{
    const std::uint64_t key = std::bit_cast<std::uint64_t>(t);
    std::lock_guard<std::mutex> lock(cache_mutex_);
    auto it = cache_.find(key);
    if (it != cache_.end())
        return *it->second;

    const int n = patch_dim();
    const std::size_t nn = static_cast<std::size_t>(n) * n;
    auto fresh = std::make_shared<ShiftedCache>();
    fresh->chol.resize(covs_.size());
    fresh->log_norm.resize(static_cast<std::size_t>(K_));
    std::vector<double> S(nn);
    for (int k = 0; k < K_; ++k) {
        std::copy(covs_.begin() + k * nn, covs_.begin() + (k + 1) * nn, S.begin());
        for (int i = 0; i < n; ++i)
            S[static_cast<std::size_t>(i) * n + i] += t;
        const std::vector<double> L = spd_cholesky(S.data(), n, "GmmPrior::prox");
        std::copy(L.begin(), L.end(), fresh->chol.begin() + k * nn);
        fresh->log_norm[static_cast<std::size_t>(k)] = chol_log_norm(L.data(), n);
    }
    auto [pos, inserted] = cache_.emplace(key, std::move(fresh));
    (void)inserted;
    return *pos->second;
}

void GmmPrior::do_prox(std::span<const double> v, double t, std::span<double> out) const
{
    const int n = patch_dim();
    const std::size_t nn = static_cast<std::size_t>(n) * n;
    const ShiftedCache& sc = shifted(t);

    // Component with the largest responsibility for v under v ~ N(mu, Sigma + t I).
    int best_k = 0;
    double best_lp = -std::numeric_limits<double>::infinity();
    std::vector<double> z(static_cast<std::size_t>(n));
    for (int k = 0; k < K_; ++k) {
        for (int i = 0; i < n; ++i)
            z[static_cast<std::size_t>(i)] = v[static_cast<std::size_t>(i)] -
                                             means_[static_cast<std::size_t>(k) * n + i];
        forward_subst(sc.chol.data() + k * nn, n, z.data());
        double quad = 0.0;
        for (double x : z)
            quad += x * x;
        const double lp = log_weights_[static_cast<std::size_t>(k)] +
                          sc.log_norm[static_cast<std::size_t>(k)] - 0.5 * quad;
        if (lp > best_lp) {
            best_lp = lp;
            best_k = k;
        }
    }

    // Wiener step of the winning component.
    std::vector<double> s(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        s[static_cast<std::size_t>(i)] = v[static_cast<std::size_t>(i)] -
                                         means_[static_cast<std::size_t>(best_k) * n + i];
    forward_subst(sc.chol.data() + best_k * nn, n, s.data());
    backward_subst(sc.chol.data() + best_k * nn, n, s.data());
    const double* Sig = covs_.data() + best_k * nn;
    for (int i = 0; i < n; ++i) {
        double acc = means_[static_cast<std::size_t>(best_k) * n + i];
        for (int j = 0; j < n; ++j)
            acc += Sig[static_cast<std::size_t>(i) * n + j] * s[static_cast<std::size_t>(j)];
        out[static_cast<std::size_t>(i)] = acc;
    }
}

void GmmPrior::do_sample(std::uint64_t seed, std::span<double> out) const
{
    const int n = patch_dim();
    const std::size_t nn = static_cast<std::size_t>(n) * n;
    Rng rng(seed);
    const double r = rng.u01();
    int k = K_ - 1;
    double cum = 0.0;
    for (int i = 0; i < K_; ++i) {
        cum += weights_[static_cast<std::size_t>(i)];
        if (r < cum) {
            k = i;
            break;
        }
    }
    std::vector<double> z(static_cast<std::size_t>(n));
    for (double& x : z)
        x = rng.normal();
    const double* L = chol_.data() + k * nn;
    for (int i = 0; i < n; ++i) {
        double acc = means_[static_cast<std::size_t>(k) * n + i];
        for (int j = 0; j <= i; ++j)
            acc += L[static_cast<std::size_t>(i) * n + j] * z[static_cast<std::size_t>(j)];
        out[static_cast<std::size_t>(i)] = acc;
    }
}

// ------------------------------------------------------------------ model IO

std::unique_ptr<GmmPrior> load_gmm(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw io_error("cannot open: " + path.string());
    std::string tag;
    int version = 0;
    in >> tag >> version;
    if (!in || tag != "PSDN-GMM" || version != 1)
        throw io_error("not a PSDN-GMM v1 model: " + path.string());
    long K = 0, n = 0;
    in >> K >> n;
    if (!in || K < 1 || n < 1 || K > 100000 || n > 100000)
        throw io_error("gmm model: bad K or n");
    std::vector<double> w(static_cast<std::size_t>(K));
    for (double& x : w)
        if (!(in >> x))
            throw io_error("gmm model: truncated weights");
    std::vector<double> means(static_cast<std::size_t>(K) * n);
    std::vector<double> covs(static_cast<std::size_t>(K) * n * n);
    for (long k = 0; k < K; ++k) {
        for (long i = 0; i < n; ++i)
            if (!(in >> means[static_cast<std::size_t>(k * n + i)]))
                throw io_error("gmm model: truncated means");
        for (long i = 0; i < n * n; ++i)
            if (!(in >> covs[static_cast<std::size_t>(k * n * n + i)]))
                throw io_error("gmm model: truncated covariances");
    }
    return std::make_unique<GmmPrior>(static_cast<int>(n), std::move(w),
                                      std::move(means), std::move(covs));
}

void save_gmm(const std::filesystem::path& path, const GmmPrior& gmm)
{
    std::ostringstream out;
    out.precision(17);
    const int K = gmm.num_components();
    const int n = gmm.patch_dim();
    out << "PSDN-GMM 1\n" << K << " " << n << "\n";
    for (int k = 0; k < K; ++k)
        out << gmm.weight(k) << (k + 1 == K ? "\n" : " ");
    for (int k = 0; k < K; ++k) {
        const auto mu = gmm.mean(k);
        for (int i = 0; i < n; ++i)
            out << mu[static_cast<std::size_t>(i)] << (i + 1 == n ? "\n" : " ");
        const auto S = gmm.covariance(k);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j)
                out << S[static_cast<std::size_t>(i) * n + j] << (j + 1 == n ? "\n" : " ");
        }
    }
    std::ofstream f(path, std::ios::trunc);
    if (!f)
        throw io_error("cannot open for writing: " + path.string());
    f << out.str();
    if (!f.flush())
        throw io_error("write failed: " + path.string());
}

// ------------------------------------------------------------------- factory

std::unique_ptr<PatchPrior> make_prior(const std::string& name, int patch_height,
                                       int patch_width, double lambda,
                                       const std::string& gmm_path)
{
    const int n = patch_height * patch_width;
    if (name == "l1")
        return std::make_unique<L1Prior>(n, lambda);
    if (name == "l2")
        return std::make_unique<L2SqPrior>(n, lambda);
    if (name == "dct-l1")
        return std::make_unique<AnalysisTransformPrior>(
            AnalysisTransformPrior::dct(patch_height, patch_width, InnerPenalty::l1, lambda));
    if (name == "dct-l2")
        return std::make_unique<AnalysisTransformPrior>(
            AnalysisTransformPrior::dct(patch_height, patch_width, InnerPenalty::l2sq, lambda));
    if (name == "gmm" || name.rfind("gmm:", 0) == 0) {
        const std::string path = name == "gmm" ? gmm_path : name.substr(4);
        if (path.empty())
            throw std::invalid_argument("gmm prior needs a model path (gmm:<path> or --gmm-path)");
        auto gmm = load_gmm(path);
        if (gmm->patch_dim() != n)
            throw std::invalid_argument("gmm model patch dim " + std::to_string(gmm->patch_dim()) +
                                        " does not match requested patch " + std::to_string(n));
        return gmm;
    }
    throw std::invalid_argument("unknown prior: " + name);
}

} // namespace psdn
