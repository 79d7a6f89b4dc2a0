#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

namespace psdn {

/// Patch-level prior with density f on R^n. Exposes the penalty
/// xi(u) = -log f(u) (up to a per-prior additive constant, documented on
/// each class), its proximity operator
///   prox_t(v) = argmin_u xi(u) + ||u - v||^2 / (2 t),
/// and direct sampling where the density is proper. Implementations are
/// immutable after construction and safe to share across threads.
class PatchPrior {
public:
    virtual ~PatchPrior() = default;

    int patch_dim() const { return n_; }
    bool has_exact_prox() const { return exact_prox_; }
    bool is_convex_neglog() const { return convex_; }
    bool can_sample() const { return sampleable_; }

    double negloglik(std::span<const double> u) const;
    void prox(std::span<const double> v, double t, std::span<double> out) const;
    std::vector<double> prox(std::span<const double> v, double t) const;
    /// Throws capability_error when can_sample() is false.
    void sample(std::uint64_t seed, std::span<double> out) const;
    std::vector<double> sample(std::uint64_t seed) const;

protected:
    PatchPrior(int n, bool exact_prox, bool convex, bool sampleable);

private:
    virtual double do_negloglik(std::span<const double> u) const = 0;
    virtual void do_prox(std::span<const double> v, double t, std::span<double> out) const = 0;
    virtual void do_sample(std::uint64_t seed, std::span<double> out) const = 0;

    int n_;
    bool exact_prox_;
    bool convex_;
    bool sampleable_;
};

/// xi(u) = lambda * ||u||_1 (normalization constant omitted). Prox is
/// entrywise soft thresholding at lambda*t; samples are iid
/// Laplace(scale 1/lambda).
class L1Prior : public PatchPrior {
public:
    L1Prior(int n, double lambda);
    double lambda() const { return lambda_; }

private:
    double do_negloglik(std::span<const double> u) const override;
    void do_prox(std::span<const double> v, double t, std::span<double> out) const override;
    void do_sample(std::uint64_t seed, std::span<double> out) const override;
    double lambda_;
};

/// xi(u) = lambda * ||u||_2^2 (normalization constant omitted). Prox is the
/// shrinkage v / (1 + 2 lambda t); samples are iid N(0, 1/(2 lambda)).
class L2SqPrior : public PatchPrior {
public:
    L2SqPrior(int n, double lambda);
    double lambda() const { return lambda_; }

private:
    double do_negloglik(std::span<const double> u) const override;
    void do_prox(std::span<const double> v, double t, std::span<double> out) const override;
    void do_sample(std::uint64_t seed, std::span<double> out) const override;
    double lambda_;
};

enum class InnerPenalty { l1, l2sq };

/// xi(u) = psi(B u) for an orthonormal B, where psi is a separable l1 or
/// squared-l2 penalty with weight lambda. Orthonormality makes the prox
/// exact: prox(v) = B^T prox_psi(B v). With penalize_dc = false the first
/// transform coefficient is left unpenalized (the usual choice for DCT
/// priors so flat patches cost nothing); the density is then improper and
/// sampling is unavailable.
class AnalysisTransformPrior : public PatchPrior {
public:
    /// B is n x n row-major; rejects matrices with ||B^T B - I||_max > 1e-10.
    AnalysisTransformPrior(std::vector<double> B, int n, InnerPenalty inner,
                           double lambda, bool penalize_dc);

    static AnalysisTransformPrior identity(int n, InnerPenalty inner, double lambda,
                                           bool penalize_dc = true);
    /// B = separable orthonormal DCT-II on a ph x pw patch.
    static AnalysisTransformPrior dct(int patch_height, int patch_width,
                                      InnerPenalty inner, double lambda,
                                      bool penalize_dc = false);

    double lambda() const { return lambda_; }
    InnerPenalty inner() const { return inner_; }
    bool penalize_dc() const { return penalize_dc_; }

private:
    double do_negloglik(std::span<const double> u) const override;
    void do_prox(std::span<const double> v, double t, std::span<double> out) const override;
    void do_sample(std::uint64_t seed, std::span<double> out) const override;

    void apply(std::span<const double> x, std::span<double> out, bool transpose) const;

    std::vector<double> B_;
    InnerPenalty inner_;
    double lambda_;
    bool penalize_dc_;
};

/// Gaussian mixture over patches, loaded from a file and never trained here.
/// negloglik is the exact mixture negative log density (all constants
/// included), evaluated through a log-sum-exp over per-component Gaussian
/// log densities with cached Cholesky factors. The prox is approximate:
/// pick the component with the largest posterior responsibility of v under
/// observation variance t, then apply that component's Wiener step
///   u = mu_k + Sigma_k (Sigma_k + t I)^-1 (v - mu_k),
/// so has_exact_prox() is false; the mixture is also not log-concave.
/// Sampling is ancestral: component by weight, then mu_k + L_k * normals.
class GmmPrior : public PatchPrior {
public:
    /// weights: K entries, nonnegative, summing to 1 within 1e-12.
    /// means: K*n row-major. covariances: K*n*n row-major, each SPD
    /// (validated by Cholesky factorization).
    GmmPrior(int n, std::vector<double> weights, std::vector<double> means,
             std::vector<double> covariances);

    int num_components() const { return K_; }
    std::span<const double> mean(int k) const;
    std::span<const double> covariance(int k) const;
    double weight(int k) const { return weights_[static_cast<std::size_t>(k)]; }

private:
    double do_negloglik(std::span<const double> u) const override;
    void do_prox(std::span<const double> v, double t, std::span<double> out) const override;
    void do_sample(std::uint64_t seed, std::span<double> out) const override;

    struct ShiftedCache; // Cholesky factors of Sigma_k + t I, per distinct t
    const ShiftedCache& shifted(double t) const;

    int K_;
    std::vector<double> weights_;
    std::vector<double> log_weights_;
    std::vector<double> means_; // K*n
    std::vector<double> covs_;  // K*n*n
    std::vector<double> chol_;  // K*n*n, lower factors of Sigma_k
    std::vector<double> log_norm_; // -n/2 log(2 pi) - 1/2 log det Sigma_k

    mutable std::mutex cache_mutex_;
    mutable std::map<std::uint64_t, std::shared_ptr<const ShiftedCache>> cache_;
};

/// Text model file:
///   line 1: "PSDN-GMM 1"
///   line 2: K n
///   then, free-form whitespace separated: K weights, then for each
///   component its n means followed by its n*n row-major covariance.
/// Parse problems throw io_error; invalid parameters throw
/// std::invalid_argument.
std::unique_ptr<GmmPrior> load_gmm(const std::filesystem::path& path);
void save_gmm(const std::filesystem::path& path, const GmmPrior& gmm);

/// Prior factory for the CLI names: "l1", "l2", "dct-l1", "dct-l2",
/// "gmm" (model from gmm_path) or "gmm:<path>". The dct variants leave the
/// DC coefficient unpenalized. Unknown names throw std::invalid_argument.
std::unique_ptr<PatchPrior> make_prior(const std::string& name, int patch_height,
                                       int patch_width, double lambda,
                                       const std::string& gmm_path = "");

} // namespace psdn
