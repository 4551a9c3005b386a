#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "rbmkit/linalg.hpp"

namespace rbmkit::reflection {

enum class Transience { kCertified, kNotTransient, kUndetermined };

/// Outcome of the Harrison-Reiman admissibility check on P = I - R^T.
struct HrReport {
    bool substochastic = false;
    Transience transience = Transience::kUndetermined;
    int cert_power = -1;        // smallest m with ||P^m 1||_inf < 1, when found
    double cert_radius = -1.0;  // power-iteration estimate of the spectral radius
    double worst_row_sum = 0.0;
    double min_entry = 0.0;
    std::string failure;  // empty when admissible

    bool admissible() const {
        return substochastic && transience == Transience::kCertified;
    }
};

/// Substochastic check plus a transience certificate: either ||P^m 1||_inf < 1
/// for some m <= power_cap, or spectral radius < 1 - 1e-9 by power iteration.
/// Failure to certify is reported as kUndetermined, distinct from a refutation
/// (a row with ||P^n 1||_inf pinned at 1, e.g. a permutation matrix).
HrReport check_harrison_reiman(const Mat& P, int power_cap = 0);

/// Reflection matrix data for the orthant Skorohod problem, R = I - P^T.
class ReflectionSpec {
public:
    /// Validates P and caches R and R^{-1}. Throws std::invalid_argument if P
    /// is not substochastic or transience cannot be certified.
    explicit ReflectionSpec(Mat P, int power_cap = 0);

    int dim() const { return d_; }
    const Mat& P() const { return P_; }
    const Mat& R() const { return R_; }
    const Mat& Rinv() const { return Rinv_; }
    const HrReport& report() const { return report_; }

private:
    int d_;
    Mat P_, R_, Rinv_;
    HrReport report_;
};

struct NeumannOptions {
    double tol = 1e-12;
    long max_products = 1000000;  // matrix-vector products, column-wise accounting
};

/// R^{-1} as the series sum of (P^T)^n. Stops once the increment max-norm is
/// below tol and the geometric tail estimate is below 5*tol, so the truncation
/// error stays within the documented 10*tol agreement with a direct solve.
/// Throws std::runtime_error (carrying the last increment norm) on cap overrun.
Mat inverse_via_neumann(const Mat& P, const NeumannOptions& opts = {});

/// Smallest n >= 1 with ||P^n 1||_inf <= 1/2, by repeated vector application.
/// Throws std::runtime_error with the trace of norms if cap is exceeded.
int contraction_coefficient(const Mat& P, int cap = 100000);

// ---------------------------------------------------------------------------
// Named generators

/// Tridiagonal P of the symmetric-collision gap process (all entries 1/2).
Mat atlas_p(int d);
/// Tridiagonal P of the asymmetric Atlas gap process: p above, 1-p below.
Mat asym_atlas_p(int d, double p);

/// Closed-form R^{-1} for the symmetric Atlas family:
/// entries 2*min(i,j)*(1 - max(i,j)/(d+1)).
Mat atlas_rinv_closed_form(int d);
/// Closed-form R^{-1} for the asymmetric Atlas family (ratio-power form).
Mat asym_atlas_rinv_closed_form(int d, double p);
/// Uniform lower bound (p-q)/p^2 on the restricted stability vectors of the
/// asymmetric Atlas family, p in (1/2, 1).
double asym_atlas_b0(double p);

// ---------------------------------------------------------------------------

/// The RBM parameter triple (mu, Sigma, R) with diffusion factor D.
class RbmParams {
public:
    /// Sigma = D D^T must be positive definite; throws otherwise.
    RbmParams(Vec mu, Mat D, ReflectionSpec refl);

    int dim() const { return refl_.dim(); }
    const Vec& mu() const { return mu_; }
    const Mat& D() const { return D_; }
    const Mat& Sigma() const { return Sigma_; }
    const ReflectionSpec& refl() const { return refl_; }
    const Vec& sigma() const { return sigma_; }  // per-coordinate sqrt(Sigma_ii)
    double sigma_max() const { return sigma_.maxCoeff(); }

    /// b = -R^{-1} mu, computed lazily; stable iff min_i b_i > 0.
    const Vec& stability_vector() const;
    bool stable() const;

private:
    Vec mu_;
    Mat D_, Sigma_;
    ReflectionSpec refl_;
    Vec sigma_;
    mutable std::optional<Vec> b_;
};

/// Rank-based particle system parameters: d+1 particles, d gaps.
/// delta[j], sigma_ranks[j] are drift and diffusion of the rank-j particle;
/// collision_p = 1/2 is the symmetric model.
struct RankParams {
    int d;  // number of gaps
    std::vector<double> delta;        // length d+1
    std::vector<double> sigma_ranks;  // length d+1, all > 0
    double collision_p = 0.5;

    static RankParams standard_atlas(int d);
    static RankParams g_atlas(const std::vector<double>& g, int d);

    void validate() const;

    /// Partial-sum stability vector b_k = sum_{i<=k} (delta_{i-1} - mean delta).
    /// Positive iff the gap process is positive recurrent. Note this is half
    /// of -R^{-1}mu of the induced gap RBM when collisions are symmetric.
    Vec stability_vector() const;
    bool stable() const;

    /// a* = sup_i i(d+1-i)/b_i  (d(d+1) for the standard Atlas).
    double a_star() const;
    /// sigma = (sup sigma_i) v (sup 1/sigma_i).
    double sigma_bound() const;

    /// The induced gap RBM: mu_i = delta_i - delta_{i-1}, tridiagonal Sigma,
    /// P per the collision split (symmetric entries 1/2 when p = 1/2).
    RbmParams gap_rbm() const;
};

/// The constants controlling the Wasserstein decay bound.
struct RateConstants {
    int d = 0;
    int n_contraction = 0;  // n(R)
    double a_theta = 0.0;   // sup_i [ (R^{-1} sigma)_i / b_i ]
    double b_theta = 0.0;   // sup_i [ (R^{-1} sigma)_i / sigma_i ]
    double r1 = 0.0;        // n(R) (1 + a^2 log(2d))
    double r2 = 0.0;        // a^2 b
    double c1 = 0.0;        // start-dependent prefactor
    double c2 = 0.0;        // start/kappa-dependent prefactor
    double a_star = -1.0;       // rank-based systems only, else -1
    double sigma_bound = -1.0;  // rank-based systems only, else -1
};

/// Evaluates every displayed rate constant at start x and kappa > 0.
/// Throws std::domain_error when the stability flag is false.
RateConstants rate_constants(const RbmParams& params, const Vec& x, double kappa);

/// Same, with the rank-based extras a* and sigma attached.
RateConstants rate_constants(const RankParams& rp, const Vec& z0, double kappa);

/// Fit quality for the uniform-geometric column-sum decay assumption.
struct BcReport {
    bool substochastic = false;
    double kappa = 0.0;  // smallest prefactor for the fitted beta
    double beta = 0.0;   // fitted geometric decay rate of ||1^T P^n||_inf
    double fit_r2 = 0.0; // log-linear fit quality over the decaying range
    bool geometric = false;  // column sums decay geometrically within the cap
    double delta = 0.0;      // min_i b_i
    bool drift_holds = false;
    double sigma_low = 0.0, sigma_high = 0.0;
    double sigma = 0.0;  // max(sigma_high, 1/sigma_low)
    bool diffusion_holds = false;
    std::vector<double> column_norms;  // ||1^T P^n||_inf trace, n = 0..cap
};

/// Fits (kappa, beta) to the column-sum decay of P^n and evaluates the drift
/// margin and diffusion bounds at this dimension. Reports falsity, never throws.
BcReport check_bc(const RbmParams& params, int cap = 200);

/// Witness report for the geometric-decay assumptions on R^{-1}, the
/// restricted stability vectors, and the diffusion bounds.
struct DfReport {
    bool holds_I = false, holds_II = false, holds_III = false, holds_IV = false;
    double C = 0.0, alpha = 0.0;  // fitted witnesses for the entrywise bound
    double M = 0.0;               // leading-block max entry
    double b0 = 0.0;              // fitted uniform drift floor
    double rstar = 0.0;           // fitted power-law exponent
    double sigma_low = 0.0, sigma_high = 0.0;
    int k0 = 0;
    double L1 = 0.0;  // k0^{r*+1} + sum_{i>=k0} i^{3+r*} alpha^{i/8}
    int violation_i = -1, violation_j = -1;  // first entrywise violation, if any
    std::vector<double> restricted_b_min;    // min_i b^{(k)}_i for k = 1..d

    bool holds() const { return holds_I && holds_II && holds_III && holds_IV; }

    /// Membership test for the start set: sup_k [min_b^{(k)} * max_{l<=k} x_l] <= B.
    bool in_start_set(const Vec& x, double B) const;
    double start_set_statistic(const Vec& x) const;
};

/// Fits (C, alpha) on the leading k0 x k0 block by log-linear least squares
/// along superdiagonals, then verifies the fitted pair as a strict entrywise
/// bound on the full matrix. A family-level assumption has no single-d test;
/// the leading block stands in for "constants visible at small scale", and a
/// violation at larger indices is what failure means here.
DfReport check_df(const RbmParams& params, int k0);

}  // namespace rbmkit::reflection
