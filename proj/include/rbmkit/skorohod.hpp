#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "rbmkit/reflection.hpp"

namespace rbmkit::skorohod {

using reflection::ReflectionSpec;

/// Time grid plus vector-valued samples; row k of x is the state at t[k].
struct DiscretePath {
    std::vector<double> t;  // strictly increasing, t[0] = 0
    Mat x;                  // (N+1) x d

    int dim() const { return static_cast<int>(x.cols()); }
    int steps() const { return static_cast<int>(t.size()) - 1; }
    void validate() const;

    /// Uniform-grid factory: N+1 points spanning [0, N*dt].
    static DiscretePath uniform(int n_steps, double dt, int d);
};

/// CSV round trip with header "t,x1,...,xd"; shortest round-trip decimals.
void write_csv(const DiscretePath& path, std::ostream& os);
DiscretePath read_csv(std::istream& is);

/// Bit-exact binary round trip (little-endian doubles behind a magic header).
void write_binary(const DiscretePath& path, std::ostream& os);
DiscretePath read_binary(std::istream& is);

struct SkorohodSolution {
    DiscretePath phi;  // constrained path, values in the nonnegative orthant
    DiscretePath ell;  // pushing path, componentwise nondecreasing from 0
    double residual = 0.0;  // discrete complementarity defect
};

/// Pushing active only near the boundary: the discrete surrogate counts
/// ell increments at grid points with phi above this threshold.
double activity_threshold(double dt, double sigma_max);

/// Discrete complementarity defect max_i sum_k 1{phi_i > eps} (ell_i(k+1)-ell_i(k)).
double complementarity_residual(const SkorohodSolution& sol, double eps_act);

/// One-dimensional reflection map via the running-minimum recursion:
/// phi_k = (x0 + psi_k) - min(0, min_{j<=k} (x0 + psi_j)).
SkorohodSolution sm_1d(const DiscretePath& psi, double x0);

struct FixedPointOptions {
    double tol = 1e-10;
    int max_sweeps = 10000;
    double eps_act = 1e-8;  // activity threshold used for the residual
};

/// Multi-dimensional reflection map for the substochastic class, as the fixed
/// point of ell_i(t_k) = max_{j<=k} [ (P^T ell)_i(t_j) - x0_i - psi_i(t_j) ]_+
/// started from ell = 0. Coincides with sm_1d exactly when d = 1.
SkorohodSolution sm_hr(const DiscretePath& psi, const ReflectionSpec& refl,
                       const Vec& x0, const FixedPointOptions& opts = {});

struct LipschitzProbe {
    std::vector<double> ratios;  // one per usable pair; skipped pairs absent
    std::vector<int> skipped;    // indices of identical-input pairs
    double max_ratio = 0.0;      // empirical lower bound for the map constant
};

/// Empirical ratios sup_t |Gamma(psi1) - Gamma(psi2)|_inf / sup_t |psi1 - psi2|_inf
/// over driver pairs sharing a grid.
LipschitzProbe lipschitz_probe(const ReflectionSpec& refl,
                               const std::vector<std::pair<DiscretePath, DiscretePath>>& pairs,
                               const std::vector<std::pair<Vec, Vec>>& starts);

}  // namespace rbmkit::skorohod
