#include "rbmkit/reflection.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace rbmkit::reflection {

namespace {
constexpr double kRowSumTol = 1e-12;
constexpr double kRadiusMargin = 1e-9;
}  // namespace

HrReport check_harrison_reiman(const Mat& P, int power_cap) {
    HrReport rep;
    const auto d = P.rows();
    if (d == 0 || P.cols() != d) {
        rep.failure = "matrix must be square and nonempty";
        return rep;
    }
    if (!P.allFinite()) {
        rep.failure = "matrix has nonfinite entries";
        return rep;
    }
    if (power_cap <= 0) power_cap = 10 * static_cast<int>(d);

    rep.min_entry = P.minCoeff();
    rep.worst_row_sum = P.rowwise().sum().maxCoeff();
    if (rep.min_entry < -kRowSumTol) {
        rep.failure = fmt::format("not substochastic: negative entry {}", rep.min_entry);
        return rep;
    }
    if (rep.worst_row_sum > 1.0 + kRowSumTol) {
        rep.failure =
            fmt::format("not substochastic: row sum {} exceeds 1", rep.worst_row_sum);
        return rep;
    }
    rep.substochastic = true;

    // Certificate 1: ||P^m 1||_inf < 1 for some m within the cap.
    Vec v = Vec::Ones(d);
    for (int m = 1; m <= power_cap; ++m) {
        v = P * v;
        if (v.maxCoeff() < 1.0 - kRowSumTol) {
            rep.transience = Transience::kCertified;
            rep.cert_power = m;
            return rep;
        }
    }

    // Certificate 2: spectral radius of |P| strictly below 1, by power iteration.
    Vec w = Vec::Constant(d, 1.0 / std::sqrt(static_cast<double>(d)));
    const Mat A = P.cwiseAbs();
    double lambda = 0.0;
    for (int it = 0; it < 2000; ++it) {
        Vec z = A * w;
        const double nz = z.norm();
        if (nz == 0.0) {
            lambda = 0.0;
            break;
        }
        z /= nz;
        const double est = w.dot(A * w) / w.squaredNorm();
        if (it > 10 && std::abs(est - lambda) < 1e-13) {
            lambda = est;
            break;
        }
        lambda = est;
        w = z;
    }
    rep.cert_radius = lambda;
    if (lambda < 1.0 - kRadiusMargin) {
        rep.transience = Transience::kCertified;
        return rep;
    }
    // A row sum pinned at exactly 1 through all powers means P^n 1 does not
    // decay along that row; radius >= 1 from the iteration refutes transience,
    // anything else stays undetermined.
    rep.transience = (lambda >= 1.0 - 1e-12) ? Transience::kNotTransient
                                             : Transience::kUndetermined;
    rep.failure = "transience undetermined within power cap";
    if (rep.transience == Transience::kNotTransient)
        rep.failure = fmt::format("not transient: spectral radius {}", lambda);
    return rep;
}

ReflectionSpec::ReflectionSpec(Mat P, int power_cap)
    : d_(static_cast<int>(P.rows())), P_(std::move(P)) {
    report_ = check_harrison_reiman(P_, power_cap);
    if (!report_.admissible())
        throw std::invalid_argument("reflection matrix rejected: " + report_.failure);
    R_ = Mat::Identity(d_, d_) - P_.transpose();
    Rinv_ = R_.partialPivLu().solve(Mat::Identity(d_, d_));
    const double defect = max_abs(Mat(R_ * Rinv_ - Mat::Identity(d_, d_)));
    if (defect > 1e-8)
        throw std::invalid_argument(
            fmt::format("reflection matrix badly conditioned: residual {}", defect));
}

Mat inverse_via_neumann(const Mat& P, const NeumannOptions& opts) {
    const auto d = P.rows();
    const Mat Pt = P.transpose();
    Mat sum = Mat::Identity(d, d);
    Mat term = Mat::Identity(d, d);
    double prev_inc = -1.0;
    long products = 0;
    while (true) {
        term = Pt * term;
        products += d;
        sum += term;
        const double inc = max_abs(term);
        if (inc == 0.0) return sum;
        // Geometric tail estimate from the observed contraction ratio.
        double tail = inc;
        if (prev_inc > 0.0 && inc < prev_inc) {
            const double rho = inc / prev_inc;
            tail = inc * rho / (1.0 - rho);
        }
        if (inc < opts.tol && tail < 5.0 * opts.tol) return sum;
        prev_inc = inc;
        if (products > opts.max_products)
            throw std::runtime_error(fmt::format(
                "Neumann series did not converge: last increment {} after {} products",
                inc, products));
    }
}

int contraction_coefficient(const Mat& P, int cap) {
    const auto d = P.rows();
    Vec v = Vec::Ones(d);
    std::vector<double> trace;
    for (int n = 1; n <= cap; ++n) {
        v = P * v;
        const double norm = v.maxCoeff();
        trace.push_back(norm);
        if (norm <= 0.5) return n;
    }
    std::string tail;
    for (std::size_t i = trace.size() >= 5 ? trace.size() - 5 : 0; i < trace.size(); ++i)
        tail += fmt::format(" {}", trace[i]);
    throw std::runtime_error(
        fmt::format("contraction coefficient exceeds cap {}; trailing norms:{}", cap, tail));
}

Mat atlas_p(int d) {
    Mat P = Mat::Zero(d, d);
    for (int i = 0; i < d; ++i) {
        if (i > 0) P(i, i - 1) = 0.5;
        if (i < d - 1) P(i, i + 1) = 0.5;
    }
    return P;
}

Mat asym_atlas_p(int d, double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("collision p must be in (0,1)");
    Mat P = Mat::Zero(d, d);
    for (int i = 0; i < d; ++i) {
        if (i > 0) P(i, i - 1) = 1.0 - p;
        if (i < d - 1) P(i, i + 1) = p;
    }
    return P;
}

Mat atlas_rinv_closed_form(int d) {
    Mat M(d, d);
    for (int i = 1; i <= d; ++i)
        for (int j = 1; j <= d; ++j) {
            const double lo = std::min(i, j), hi = std::max(i, j);
            M(i - 1, j - 1) = 2.0 * lo * (1.0 - hi / (d + 1.0));
        }
    return M;
}

Mat asym_atlas_rinv_closed_form(int d, double p) {
    if (!(p > 0.0 && p < 1.0) || p == 0.5)
        throw std::invalid_argument("asymmetric closed form needs p in (0,1), p != 1/2");
    const double q = 1.0 - p;
    const double r = p / q;  // > 1 when p > 1/2
    Mat M(d, d);
    const double denom_up = 1.0 - std::pow(q / p, d + 1);
    const double denom_dn = std::pow(r, d + 1) - 1.0;
    for (int i = 1; i <= d; ++i)
        for (int j = 1; j <= d; ++j) {
            if (i <= j) {
                M(i - 1, j - 1) = std::pow(q / p, j - i) / (p - q) *
                                  (1.0 - std::pow(q / p, i)) *
                                  (1.0 - std::pow(q / p, d + 1 - j)) / denom_up;
            } else {
                M(i - 1, j - 1) = std::pow(r, i - j) / (p - q) *
                                  (std::pow(r, j) - 1.0) *
                                  (std::pow(r, d + 1 - i) - 1.0) / denom_dn;
            }
        }
    return M;
}

double asym_atlas_b0(double p) {
    const double q = 1.0 - p;
    return (p - q) / (p * p);
}

RbmParams::RbmParams(Vec mu, Mat D, ReflectionSpec refl)
    : mu_(std::move(mu)), D_(std::move(D)), refl_(std::move(refl)) {
    const int d = refl_.dim();
    if (mu_.size() != d) throw std::invalid_argument("drift dimension mismatch");
    if (D_.rows() != d) throw std::invalid_argument("diffusion factor row mismatch");
    Sigma_ = D_ * D_.transpose();
    Eigen::SelfAdjointEigenSolver<Mat> es(Sigma_);
    if (es.eigenvalues().minCoeff() <= 0.0)
        throw std::invalid_argument("covariance D D^T is not positive definite");
    sigma_ = Sigma_.diagonal().cwiseSqrt();
}

const Vec& RbmParams::stability_vector() const {
    if (!b_) b_ = Vec(-(refl_.Rinv() * mu_));
    return *b_;
}

bool RbmParams::stable() const { return stability_vector().minCoeff() > 0.0; }

RankParams RankParams::standard_atlas(int d) {
    RankParams rp;
    rp.d = d;
    rp.delta.assign(d + 1, 0.0);
    rp.delta[0] = 1.0;
    rp.sigma_ranks.assign(d + 1, 1.0);
    return rp;
}

RankParams RankParams::g_atlas(const std::vector<double>& g, int d) {
    if (static_cast<int>(g.size()) < d + 1)
        throw std::invalid_argument("rank drift vector shorter than d+1");
    RankParams rp;
    rp.d = d;
    rp.delta.assign(g.begin(), g.begin() + d + 1);
    rp.sigma_ranks.assign(d + 1, 1.0);
    return rp;
}

void RankParams::validate() const {
    if (d < 1) throw std::invalid_argument("need at least one gap");
    if (static_cast<int>(delta.size()) != d + 1 ||
        static_cast<int>(sigma_ranks.size()) != d + 1)
        throw std::invalid_argument("rank coefficient vectors must have length d+1");
    for (double s : sigma_ranks)
        if (!(s > 0.0)) throw std::invalid_argument("rank diffusions must be positive");
    if (!(collision_p > 0.0 && collision_p < 1.0))
        throw std::invalid_argument("collision p must be in (0,1)");
}

Vec RankParams::stability_vector() const {
    validate();
    double mean = 0.0;
    for (double x : delta) mean += x;
    mean /= (d + 1);
    Vec b(d);
    double acc = 0.0;
    for (int k = 1; k <= d; ++k) {
        acc += delta[k - 1] - mean;
        b(k - 1) = acc;
    }
    return b;
}

bool RankParams::stable() const { return stability_vector().minCoeff() > 0.0; }

double RankParams::a_star() const {
    const Vec b = stability_vector();
    if (b.minCoeff() <= 0.0)
        throw std::domain_error("a* undefined: stability vector not positive");
    double best = 0.0;
    for (int i = 1; i <= d; ++i)
        best = std::max(best, i * (d + 1.0 - i) / b(i - 1));
    return best;
}

double RankParams::sigma_bound() const {
    double hi = 0.0, lo = 0.0;
    for (double s : sigma_ranks) {
        hi = std::max(hi, s);
        lo = std::max(lo, 1.0 / s);
    }
    return std::max(hi, lo);
}

RbmParams RankParams::gap_rbm() const {
    validate();
    Vec mu(d);
    for (int i = 1; i <= d; ++i) mu(i - 1) = delta[i] - delta[i - 1];
    // Gap noise is the difference of neighboring rank noises: D is the d x (d+1)
    // incidence factor, giving the tridiagonal Sigma directly.
    Mat D = Mat::Zero(d, d + 1);
    for (int i = 1; i <= d; ++i) {
        D(i - 1, i) = sigma_ranks[i];
        D(i - 1, i - 1) = -sigma_ranks[i - 1];
    }
    const Mat P = collision_p == 0.5 ? atlas_p(d) : asym_atlas_p(d, collision_p);
    return RbmParams(std::move(mu), std::move(D), ReflectionSpec(P));
}

namespace {

RateConstants rate_constants_impl(const RbmParams& params, const Vec& x, double kappa) {
    if (!(kappa > 0.0)) throw std::invalid_argument("kappa must be positive");
    if (!params.stable())
        throw std::domain_error("constants undefined for unstable parameter triple");
    const int d = params.dim();
    if (x.size() != d) throw std::invalid_argument("start vector dimension mismatch");

    const Mat& Rinv = params.refl().Rinv();
    const Vec& sig = params.sigma();
    const Vec& b = params.stability_vector();
    const Vec v = Rinv * sig;  // row sums of R^{-1} weighted by sigma

    RateConstants rc;
    rc.d = d;
    rc.n_contraction = contraction_coefficient(params.refl().P());
    rc.a_theta = (v.array() / b.array()).maxCoeff();
    rc.b_theta = (v.array() / sig.array()).maxCoeff();
    rc.r1 = rc.n_contraction * (1.0 + rc.a_theta * rc.a_theta * std::log(2.0 * d));
    rc.r2 = rc.a_theta * rc.a_theta * rc.b_theta;

    const double x1 = l1_norm(x);
    rc.c1 = 2.0 * x1 + rc.a_theta * v.sum();

    const double xstar = (x.array() / sig.array()).maxCoeff();  // sup sigma_i^{-1} x_i
    const double frob2 = Rinv.array().square().sum();
    const double sig2 = sig.array().square().sum();
    rc.c2 = 2.0 * x1 * std::exp(3.0 / (kappa * rc.a_theta * rc.b_theta) * xstar) +
            rc.a_theta * std::sqrt(2.0 * d * (1.0 + d) * frob2 * sig2);
    return rc;
}

}  // namespace

RateConstants rate_constants(const RbmParams& params, const Vec& x, double kappa) {
    return rate_constants_impl(params, x, kappa);
}

RateConstants rate_constants(const RankParams& rp, const Vec& z0, double kappa) {
    RateConstants rc = rate_constants_impl(rp.gap_rbm(), z0, kappa);
    rc.a_star = rp.a_star();
    rc.sigma_bound = rp.sigma_bound();
    return rc;
}

BcReport check_bc(const RbmParams& params, int cap) {
    BcReport rep;
    const Mat& P = params.refl().P();
    const int d = params.dim();
    rep.substochastic = params.refl().report().substochastic;

    // Column-sum norms ||1^T P^n||_inf, n = 0..cap, by row-vector iteration.
    Eigen::RowVectorXd u = Eigen::RowVectorXd::Ones(d);
    rep.column_norms.push_back(1.0);
    for (int n = 1; n <= cap; ++n) {
        u = u * P;
        rep.column_norms.push_back(u.cwiseAbs().maxCoeff());
    }

    // Log-linear fit over the decaying range; kappa then tightened to the
    // smallest prefactor that dominates every sample at the fitted beta.
    std::vector<double> xs, ys;
    for (int n = 0; n <= cap; ++n) {
        if (rep.column_norms[n] > 1e-14) {
            xs.push_back(n);
            ys.push_back(std::log(rep.column_norms[n]));
        }
    }
    if (xs.size() <= 1) {
        // Column sums vanish immediately (e.g. P = 0): geometric with any beta.
        rep.beta = 1.0 - 1e-9;
        rep.kappa = 1.0;
        rep.fit_r2 = 1.0;
        rep.geometric = true;
    } else {
        Eigen::Map<Eigen::ArrayXd> ax(xs.data(), xs.size());
        Eigen::Map<Eigen::ArrayXd> ay(ys.data(), ys.size());
        const double slope = std::min(ls_slope(ax, ay), 0.0);
        rep.beta = 1.0 - std::exp(slope);
        rep.fit_r2 = ls_r2(ax, ay);
        double kap = 0.0;
        for (int n = 0; n <= cap; ++n)
            kap = std::max(kap, rep.column_norms[n] / std::pow(1.0 - rep.beta, n));
        rep.kappa = kap;
        rep.geometric = rep.beta > 1e-6 && rep.fit_r2 > 0.95;
    }

    rep.delta = params.stability_vector().minCoeff();
    rep.drift_holds = rep.delta > 0.0;

    rep.sigma_low = params.sigma().minCoeff();
    rep.sigma_high = params.sigma().maxCoeff();
    rep.sigma = std::max(rep.sigma_high, 1.0 / rep.sigma_low);
    rep.diffusion_holds = std::isfinite(rep.sigma) && rep.sigma_low > 0.0;
    return rep;
}

bool DfReport::in_start_set(const Vec& x, double B) const {
    return start_set_statistic(x) <= B;
}

double DfReport::start_set_statistic(const Vec& x) const {
    double stat = 0.0, runmax = 0.0;
    for (int k = 0; k < static_cast<int>(restricted_b_min.size()) && k < x.size(); ++k) {
        runmax = std::max(runmax, x(k));
        stat = std::max(stat, restricted_b_min[k] * runmax);
    }
    return stat;
}

DfReport check_df(const RbmParams& params, int k0) {
    const int d = params.dim();
    if (k0 < 2 || k0 > d) throw std::invalid_argument("k0 must lie in {2,...,d}");
    DfReport rep;
    rep.k0 = k0;
    const Mat& Rinv = params.refl().Rinv();

    // I: fit alpha by least squares on log entries of the leading block vs
    // offset j - i, C as the strict bound over the block, then verify globally.
    std::vector<double> xs, ys;
    for (int i = 0; i < k0; ++i)
        for (int j = i; j < k0; ++j)
            if (Rinv(i, j) > 1e-14) {
                xs.push_back(j - i);
                ys.push_back(std::log(Rinv(i, j)));
            }
    bool have_slope = false;
    if (xs.size() >= 2) {
        Eigen::Map<Eigen::ArrayXd> ax(xs.data(), xs.size());
        if (ax.maxCoeff() > ax.minCoeff()) {
            Eigen::Map<Eigen::ArrayXd> ay(ys.data(), ys.size());
            // The block fit underestimates the asymptotic ratio (boundary
            // factors steepen the first superdiagonals), so the verified
            // witness carries a 10% margin.
            rep.alpha = 1.10 * std::exp(std::min(ls_slope(ax, ay), -1e-12));
            have_slope = true;
        }
    }
    if (!have_slope) rep.alpha = 0.5;  // diagonal-only data: any alpha works
    rep.alpha = std::min(rep.alpha, 1.0 - 1e-12);

    double C = 0.0;
    for (int i = 0; i < k0; ++i)
        for (int j = i; j < k0; ++j)
            C = std::max(C, Rinv(i, j) / std::pow(rep.alpha, j - i));
    rep.C = std::max(C, 1.0);

    rep.holds_I = true;
    // Witnesses fitted on a finite block sit a truncation bias below the
    // family constants; verification carries matching slack.
    const double slack = 1.05;
    double worst_entry = 0.0;  // witness: largest entry breaking the bound
    for (int j = 0; j < d; ++j)
        for (int i = 0; i <= j; ++i) {
            if (Rinv(i, j) <= slack * rep.C * std::pow(rep.alpha, j - i)) continue;
            rep.holds_I = false;
            if (Rinv(i, j) > worst_entry) {
                worst_entry = Rinv(i, j);
                rep.violation_i = i + 1;
                rep.violation_j = j + 1;
            }
        }

    // II: leading-block max as the witness M, verified over the full matrix.
    rep.M = std::max(Rinv.topLeftCorner(k0, k0).maxCoeff(), 1.0);
    rep.holds_II = Rinv.maxCoeff() <= slack * rep.M;
    if (!rep.holds_II && rep.violation_i < 0) {
        Eigen::Index vi, vj;
        Rinv.maxCoeff(&vi, &vj);
        rep.violation_i = static_cast<int>(vi) + 1;
        rep.violation_j = static_cast<int>(vj) + 1;
    }

    // III: restricted stability vectors b^{(k)} = -(R|_k)^{-1} mu|_k.
    rep.restricted_b_min.resize(d);
    const Mat& R = params.refl().R();
    for (int k = 1; k <= d; ++k) {
        const Vec bk = R.topLeftCorner(k, k).partialPivLu().solve(-params.mu().head(k));
        rep.restricted_b_min[k - 1] = bk.minCoeff();
    }
    bool all_pos = true;
    for (int k = k0; k <= d; ++k) all_pos = all_pos && rep.restricted_b_min[k - 1] > 0.0;
    if (all_pos) {
        std::vector<double> lx, ly;
        for (int k = k0; k <= d; ++k) {
            lx.push_back(std::log(static_cast<double>(k)));
            ly.push_back(-std::log(rep.restricted_b_min[k - 1]));
        }
        double slope = 0.0;
        if (lx.size() >= 2 && lx.back() > lx.front()) {
            Eigen::Map<Eigen::ArrayXd> ax(lx.data(), lx.size());
            Eigen::Map<Eigen::ArrayXd> ay(ly.data(), ly.size());
            slope = ls_slope(ax, ay);
        }
        rep.rstar = std::max(0.0, slope);
        double b0 = std::numeric_limits<double>::infinity();
        for (int k = k0; k <= d; ++k)
            b0 = std::min(b0, rep.restricted_b_min[k - 1] * std::pow(k, rep.rstar));
        rep.b0 = b0;
        rep.holds_III = rep.b0 > 0.0;
    }

    rep.sigma_low = params.sigma().minCoeff();
    rep.sigma_high = params.sigma().maxCoeff();
    rep.holds_IV = rep.sigma_low > 0.0 && std::isfinite(rep.sigma_high);

    double tail = 0.0;
    for (int i = k0; i <= d; ++i)
        tail += std::pow(static_cast<double>(i), 3.0 + rep.rstar) *
                std::pow(rep.alpha, i / 8.0);
    rep.L1 = std::pow(static_cast<double>(k0), rep.rstar + 1.0) + tail;
    return rep;
}

}  // namespace rbmkit::reflection
