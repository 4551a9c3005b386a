#pragma once

#include "rbmkit/reflection.hpp"

namespace rbmkit::rates {

using reflection::RateConstants;

// The decay theorems assert existence of universal constants without pinning
// values. They enter here as configuration with default 1; bound shapes (decay
// in t, growth in d), not absolute levels, are the testable content.

struct WasFreeConstants {
    double t0 = 1.0, d1 = 1.0, d2 = 1.0;
};

/// Admissibility threshold t0 (1 + a^2 log(2d)) below which the bound is not
/// asserted.
double was_admissible_time(const RateConstants& rc, const WasFreeConstants& free);

/// Wasserstein decay bound C1 (2 e^{-D1 t / R1} + e^{-t/(16 D2 R2)})
///                         + C2 e^{-t/(8 D2 R2)}.
/// Throws std::domain_error for t below the admissible threshold.
double was_bound(double t, const RateConstants& rc, const WasFreeConstants& free = {});

/// Relaxation-time bound: max of the log-balance point and the threshold.
double was_trel_bound(const RateConstants& rc, const WasFreeConstants& free = {});

struct BcFreeConstants {
    double e1 = 1.0, e2 = 1.0, e3 = 1.0, e4 = 1.0, t1 = 1.0;
};

double bc_bound(double t, double x_l1, double x_sup, int d,
                const BcFreeConstants& free = {});
double bc_trel_bound(double x_l1, double x_sup, int d, const BcFreeConstants& free = {});

struct AtlasFreeConstants {
    double f1 = 1.0, f2 = 1.0, f3 = 1.0, f4 = 1.0, t2 = 1.0;
};

/// Rank-based decay bound in terms of a* and the diffusion bound sigma.
double atlas_bound(double t, double z_l1, double z_sup, int d, double a_star,
                   double sigma, const AtlasFreeConstants& free = {});
double atlas_trel_bound(double z_l1, double z_sup, int d, double a_star, double sigma,
                        const AtlasFreeConstants& free = {});

struct DfFreeConstants {
    double c0 = 1.0, c0_prime = 1.0, c1 = 1.0;
};

/// Weighted-norm decay bound for systems passing the geometric-decay
/// assumptions: stretched-exponential regime below d^{4+2r*}, exponential
/// after. B is the start-set radius.
double df_bound(double t, int d, double rstar, double L1, double x_sup, double B,
                double sigma_low, const DfFreeConstants& free = {});

}  // namespace rbmkit::rates
