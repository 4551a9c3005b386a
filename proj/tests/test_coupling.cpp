#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "rbmkit/coupling.hpp"
#include "rbmkit/stationary.hpp"

using namespace rbmkit;
using namespace rbmkit::coupling;
using dynamics::SimConfig;
using reflection::RankParams;
using reflection::RbmParams;
using reflection::ReflectionSpec;

namespace {
RbmParams scalar_params(double mu) {
    return RbmParams(Vec::Constant(1, mu), Mat::Identity(1, 1),
                     ReflectionSpec(Mat::Zero(1, 1)));
}
}  // namespace

TEST_CASE("synchronous pairs") {
    SUBCASE("equal starts stay coalesced") {
        const auto params = RankParams::standard_atlas(2).gap_rbm();
        SimConfig cfg{1e-3, 1.0, 1, 5, 1};
        const Vec x = Vec::Ones(2);
        const auto pair = synchronous_pair(params, x, x, cfg);
        CHECK(pair.dist.l1.maxCoeff() == 0.0);
        const auto ds = distance_series(pair, params, 0.5);
        CHECK(ds.l1.maxCoeff() == 0.0);
        CHECK(ds.wl1.maxCoeff() == 0.0);
        CHECK(ds.u.maxCoeff() == 0.0);
    }
    SUBCASE("weight one reduces the weighted distance to l1") {
        const auto params = RankParams::standard_atlas(3).gap_rbm();
        SimConfig cfg{1e-3, 0.5, 1, 7, 1};
        Vec xa = Vec::Zero(3), xb(3);
        xb << 1.0, 0.5, 0.25;
        const auto pair = synchronous_pair(params, xa, xb, cfg);
        const auto ds = distance_series(pair, params, 1.0);
        CHECK(max_abs(Vec(ds.wl1 - ds.l1)) < 1e-14);
    }
    SUBCASE("scalar distance is exactly nonincreasing, zero tolerance") {
        SimConfig cfg{1e-3, 5.0, 1, 0, 1};
        for (long p = 0; p < 1000; ++p) {
            const auto pr = sync_pair_1d(-1.0, 1.0, 1.0, 0.0, cfg, p);
            for (int k = 1; k <= 5000; ++k) CHECK(pr.diff(k) <= pr.diff(k - 1));
            CHECK(pr.diff.minCoeff() >= 0.0);
            CHECK(pr.lo.minCoeff() >= 0.0);
        }
    }
    SUBCASE("mapped difference stays nonnegative and nonincreasing for ordered starts") {
        const auto params = RankParams::standard_atlas(3).gap_rbm();
        SimConfig cfg{1e-3, 2.0, 200, 13, 2};
        const Vec xa = Vec::Zero(3);
        Vec xb = Vec::Zero(3);
        xb(0) = 1.0;
        const double floor_incr =
            10.0 * params.sigma_max() * std::sqrt(cfg.dt);
        const auto counts =
            sync_rinv_monotonicity(params, xa, xb, cfg, floor_incr, 1e-9);
        CHECK(counts.steps > 0);
        CHECK(static_cast<double>(counts.incr_viol) / counts.steps < 0.01);
        CHECK(static_cast<double>(counts.neg_viol) / counts.steps < 0.01);
    }
    SUBCASE("curve kernel matches a directly stored pair") {
        const auto params = RankParams::standard_atlas(2).gap_rbm();
        SimConfig cfg{2e-3, 0.4, 3, 21, 1};
        Vec xa = Vec::Zero(2), xb = Vec::Ones(2);
        const std::vector<int> obs = {0, 50, 100, 200};
        const Mat curves = sync_wl1_curves(
            params, xa, [&](long, Vec& z) { z = xb; }, cfg, obs, 1.0);
        for (long p = 0; p < 3; ++p) {
            const auto pair = synchronous_pair(params, xa, xb, cfg, p);
            for (std::size_t j = 0; j < obs.size(); ++j)
                CHECK(curves(p, j) == doctest::Approx(pair.dist.l1(obs[j])).epsilon(1e-12));
        }
    }
}

TEST_CASE("triangle bound through the origin copy") {
    // weighted |A - B| never exceeds u(A) + u(B) along synchronized triples
    const auto params = RankParams::standard_atlas(3).gap_rbm();
    const auto law = stationary::finite_atlas_stationary(3);
    SimConfig cfg{1e-3, 1.0, 50, 29, 2};
    const double beta = 0.7;
    const Mat& Rinv = params.refl().Rinv();
    const NoiseKernel init(99, NoiseKernel::kInitial);
    auto wl1 = [&](const Vec& v) {
        double acc = 0.0, w = 1.0;
        for (int i = 0; i < v.size(); ++i) {
            w *= beta;
            acc += w * std::abs(v(i));
        }
        return acc;
    };
    for (long p = 0; p < 50; ++p) {
        Vec xb(3);
        for (int i = 0; i < 3; ++i) xb(i) = init.exponential(law.rates(i), p, i, 0);
        const auto pairAB = synchronous_pair(params, Vec::Ones(3), xb, cfg, p);
        const auto pairAO = synchronous_pair(params, Vec::Ones(3), Vec::Zero(3), cfg, p);
        const auto pairBO = synchronous_pair(params, xb, Vec::Zero(3), cfg, p);
        for (int k = 0; k <= 1000; k += 100) {
            const Vec dab = (pairAB.a.x.row(k) - pairAB.b.x.row(k)).transpose();
            const Vec ua = Rinv * (pairAO.a.x.row(k) - pairAO.b.x.row(k)).transpose();
            const Vec ub = Rinv * (pairBO.a.x.row(k) - pairBO.b.x.row(k)).transpose();
            CHECK(wl1(dab) <= wl1(ua) + wl1(ub) + 1e-9);
        }
    }
}

TEST_CASE("boundary-hit epochs") {
    SUBCASE("scalar case: distance at the first epoch is below the threshold") {
        const auto params = scalar_params(-1.0);
        SimConfig cfg{1e-3, 20.0, 1, 3, 1};
        const double eps = 1e-3;
        for (long p = 0; p < 200; ++p) {
            const auto rec = contraction_epochs(params, Vec::Zero(1), Vec::Ones(1),
                                                cfg, eps, 1, p);
            REQUIRE(!rec.close_times.empty());
            CHECK(rec.l1_at_close[0] <= eps + 1e-12);
            CHECK(rec.l1_at_close[0] <= 0.5 * rec.l1_start);
        }
    }
    SUBCASE("no boundary visits in the horizon leaves the counter at zero") {
        const auto params = scalar_params(0.5);  // outward drift, interior start
        SimConfig cfg{1e-3, 0.5, 1, 5, 1};
        const auto rec = contraction_epochs(params, Vec::Constant(1, 5.0),
                                            Vec::Constant(1, 6.0), cfg, 1e-3, 4, 0);
        CHECK(rec.close_times.empty());
    }
    SUBCASE("atlas d=2 halving at the first epoch on average") {
        const auto params = RankParams::standard_atlas(2).gap_rbm();
        SimConfig cfg{1e-3, 30.0, 500, 31, 2};
        Vec xb = Vec::Zero(2);
        xb(0) = 1.0;
        const double eps = skorohod::activity_threshold(cfg.dt, params.sigma_max());
        const Mat rec = epoch_halving_ensemble(params, Vec::Zero(2), xb, cfg, eps, 1);
        double mean_l1 = 0.0;
        int closed = 0;
        for (int p = 0; p < cfg.n_paths; ++p) {
            mean_l1 += rec(p, 1);
            if (std::isfinite(rec(p, 0))) ++closed;
        }
        mean_l1 /= cfg.n_paths;
        CHECK(closed > cfg.n_paths * 95 / 100);
        CHECK(mean_l1 <= 0.5 * 1.0 + 10.0 * std::sqrt(cfg.dt));
    }
}

TEST_CASE("mirror coupling") {
    const auto rp = RankParams::standard_atlas(1);  // two particles
    SUBCASE("empty mirrored set reduces to a synchronous pair") {
        Vec y0(2);
        y0 << 0.0, 1.0;
        SimConfig cfg{1e-3, 0.5, 1, 7, 1};
        const auto res = mirror_pair(rp, -1, y0, y0, cfg, 0, true);
        CHECK(res.coupling_time == 0.0);
        CHECK((res.ordered_a.x - res.ordered_b.x).cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("identical starts couple immediately") {
        Vec y0(2);
        y0 << 0.0, 1.0;
        SimConfig cfg{1e-3, 0.5, 1, 7, 1};
        const auto res = mirror_pair(rp, 0, y0, y0, cfg);
        CHECK(res.coupling_time == 0.0);
    }
    SUBCASE("mirrored phase: the driven coordinates' sum moves deterministically") {
        Vec ya(2), yb(2);
        ya << 0.0, 5.0;
        yb << 0.5, 5.0;  // far-away top particle: no crossings early on
        SimConfig cfg{1e-4, 0.05, 1, 11, 1};
        const auto res = mirror_pair(rp, 0, ya, yb, cfg, 0, true);
        const int upto = std::isfinite(res.coupling_time)
                             ? static_cast<int>(res.coupling_time / cfg.dt)
                             : 500;
        for (int k = 1; k < upto; ++k) {
            if (std::isfinite(res.first_cross_time) &&
                k * cfg.dt >= res.first_cross_time)
                break;
            const double sum_now = res.ordered_a.x(k, 0) + res.ordered_b.x(k, 0);
            const double sum_prev =
                res.ordered_a.x(k - 1, 0) + res.ordered_b.x(k - 1, 0);
            // drift 1 on each mirrored bottom particle, noise cancels
            CHECK(sum_now - sum_prev == doctest::Approx(2.0 * cfg.dt).epsilon(1e-9));
        }
    }
    SUBCASE("coupling probability grows as the initial discrepancy shrinks") {
        SimConfig cfg{1e-4, 2.0, 1, 13, 1};
        auto prob = [&](double eps) {
            int coupled = 0;
            const int n = 400;
            for (long p = 0; p < n; ++p) {
                Vec ya(2), yb(2);
                ya << 0.0, 1.0;
                yb << eps, 1.0;
                const auto res = mirror_pair(rp, 0, ya, yb, cfg, p);
                if (res.coupling_time < res.first_cross_time) ++coupled;
            }
            return coupled / 400.0;
        };
        const double p1 = prob(0.1), p2 = prob(0.05), p3 = prob(0.01);
        CHECK(p3 > 0.0);
        CHECK(p3 >= p2 - 0.05);
        CHECK(p2 >= p1 - 0.05);
        CHECK(p3 > p1);
    }
    SUBCASE("out-of-range mirror index is rejected") {
        Vec y0(2);
        y0 << 0.0, 1.0;
        SimConfig cfg{1e-3, 0.1, 1, 7, 1};
        CHECK_THROWS_AS(mirror_pair(rp, 5, y0, y0, cfg), std::invalid_argument);
    }
}
