#include "rbmkit/rates.hpp"

#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

namespace rbmkit::rates {

double was_admissible_time(const RateConstants& rc, const WasFreeConstants& free) {
    return free.t0 * (1.0 + rc.a_theta * rc.a_theta * std::log(2.0 * rc.d));
}

double was_bound(double t, const RateConstants& rc, const WasFreeConstants& free) {
    const double tmin = was_admissible_time(rc, free);
    if (t < tmin)
        throw std::domain_error(
            fmt::format("bound not asserted below t0 (1 + a^2 log 2d) = {}", tmin));
    return rc.c1 * (2.0 * std::exp(-free.d1 * t / rc.r1) +
                    std::exp(-t / (16.0 * free.d2 * rc.r2))) +
           rc.c2 * std::exp(-t / (8.0 * free.d2 * rc.r2));
}

double was_trel_bound(const RateConstants& rc, const WasFreeConstants& free) {
    const double balance =
        rc.r1 / free.d1 * std::log(8.0 * rc.c1) +
        16.0 * free.d2 * rc.r2 * std::log(4.0 * (rc.c1 + rc.c2));
    return std::max(balance, was_admissible_time(rc, free));
}

double bc_bound(double t, double x_l1, double x_sup, int d, const BcFreeConstants& free) {
    const double tmin = free.t1 * std::max(x_sup, std::log(2.0 * d));
    if (t < tmin)
        throw std::domain_error(
            fmt::format("bound not asserted below t1 max(|x|_inf, log 2d) = {}", tmin));
    const double d2 = free.e1 * d * static_cast<double>(d);
    return 2.0 * (2.0 * x_l1 + d2) * std::exp(-free.e2 * t / std::log(2.0 * d)) +
           (4.0 * x_l1 + d2) * std::exp(-free.e4 * t / 2.0) +
           free.e3 * d * static_cast<double>(d) * std::exp(-free.e4 * t);
}

double bc_trel_bound(double x_l1, double x_sup, int d, const BcFreeConstants& free) {
    const double d2 = free.e1 * d * static_cast<double>(d);
    const double balance =
        std::log(8.0 * (2.0 * x_l1 + d2)) * std::log(2.0 * d) / free.e2 +
        (2.0 * std::log(8.0 * (4.0 * x_l1 + d2)) +
         std::log(8.0 * free.e3 * d * static_cast<double>(d))) /
            free.e4;
    return std::max(balance, free.t1 * std::max(x_sup, std::log(2.0 * d)));
}

namespace {
struct AtlasPieces {
    double pre;    // F1 sigma^2 a* d^3
    double rate1;  // d^2 (1 + sigma^2 a*^2 log 2d)
    double rate2;  // sigma^4 a*^2 (d+1)^2
    double tail;   // F3 sigma^2 a* d^{7/2}
};

AtlasPieces atlas_pieces(int d, double a_star, double sigma,
                         const AtlasFreeConstants& free) {
    const double s2 = sigma * sigma;
    const double dd = static_cast<double>(d);
    return {free.f1 * s2 * a_star * dd * dd * dd,
            dd * dd * (1.0 + s2 * a_star * a_star * std::log(2.0 * dd)),
            s2 * s2 * a_star * a_star * (dd + 1.0) * (dd + 1.0),
            free.f3 * s2 * a_star * std::pow(dd, 3.5)};
}
}  // namespace

double atlas_bound(double t, double z_l1, double z_sup, int d, double a_star,
                   double sigma, const AtlasFreeConstants& free) {
    const double s2 = sigma * sigma;
    const double tmin = free.t2 * std::max(s2 * a_star * z_sup,
                                           1.0 + s2 * a_star * a_star * std::log(2.0 * d));
    if (t < tmin)
        throw std::domain_error(fmt::format("bound not asserted below {}", tmin));
    const auto p = atlas_pieces(d, a_star, sigma, free);
    return 2.0 * (2.0 * z_l1 + p.pre) * std::exp(-free.f2 * t / p.rate1) +
           (4.0 * z_l1 + p.pre) * std::exp(-free.f4 * t / (2.0 * p.rate2)) +
           p.tail * std::exp(-free.f4 * t / p.rate2);
}

double atlas_trel_bound(double z_l1, double z_sup, int d, double a_star, double sigma,
                        const AtlasFreeConstants& free) {
    const auto p = atlas_pieces(d, a_star, sigma, free);
    const double s2 = sigma * sigma;
    const double balance =
        p.rate1 * std::log(8.0 * (2.0 * z_l1 + p.pre)) / free.f2 +
        p.rate2 *
            (2.0 * std::log(8.0 * (4.0 * z_l1 + p.pre)) + std::log(8.0 * p.tail)) /
            free.f4;
    return std::max(balance,
                    free.t2 * std::max(s2 * a_star * z_sup,
                                       1.0 + s2 * a_star * a_star * std::log(2.0 * d)));
}

double df_bound(double t, int d, double rstar, double L1, double x_sup, double B,
                double sigma_low, const DfFreeConstants& free) {
    const double expo = 1.0 / (4.0 + 2.0 * rstar);
    const double t0p = free.c0_prime * std::pow(1.0 + rstar, 8.0 + 4.0 * rstar);
    if (t < t0p)
        throw std::domain_error(fmt::format("bound not asserted below t0' = {}", t0p));
    const double pre =
        free.c1 * (L1 * std::sqrt(1.0 + std::pow(t, expo)) +
                   x_sup * std::exp(B / (sigma_low * sigma_low)));
    const double crossover = std::pow(static_cast<double>(d), 4.0 + 2.0 * rstar);
    if (t < crossover) return pre * std::exp(-free.c0 * std::pow(t, expo));
    return pre * std::exp(-free.c0 * t / std::pow(static_cast<double>(d), 3.0 + 2.0 * rstar));
}

}  // namespace rbmkit::rates
