#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "rbmkit/rng.hpp"
#include "rbmkit/skorohod.hpp"

using namespace rbmkit;
using namespace rbmkit::skorohod;
using reflection::ReflectionSpec;

namespace {

DiscretePath brownian_driver(int n, double dt, int d, std::uint64_t seed, long tag) {
    NoiseKernel kern(seed, NoiseKernel::kScratch);
    DiscretePath psi = DiscretePath::uniform(n, dt, d);
    const double s = std::sqrt(dt);
    for (int k = 1; k <= n; ++k)
        for (int j = 0; j < d; ++j)
            psi.x(k, j) = psi.x(k - 1, j) + s * kern.gaussian_pair(tag, k, j)[0];
    return psi;
}

bool nondecreasing_columns(const DiscretePath& p, double tol = 0.0) {
    for (int k = 1; k < static_cast<int>(p.t.size()); ++k)
        for (int j = 0; j < p.dim(); ++j)
            if (p.x(k, j) < p.x(k - 1, j) - tol) return false;
    return true;
}

}  // namespace

TEST_CASE("one-dimensional map") {
    SUBCASE("interior path is untouched") {
        DiscretePath psi = DiscretePath::uniform(10, 0.1, 1);  // psi = 0
        const auto sol = sm_1d(psi, 1.0);
        CHECK(sol.phi.x.minCoeff() == 1.0);
        CHECK(sol.phi.x.maxCoeff() == 1.0);
        CHECK(sol.ell.x.maxCoeff() == 0.0);
    }
    SUBCASE("pure pushing against a falling driver") {
        DiscretePath psi = DiscretePath::uniform(20, 0.05, 1);
        for (int k = 0; k <= 20; ++k) psi.x(k, 0) = -psi.t[k];
        const auto sol = sm_1d(psi, 0.0);
        for (int k = 0; k <= 20; ++k) {
            CHECK(sol.phi.x(k, 0) == 0.0);
            CHECK(sol.ell.x(k, 0) == doctest::Approx(psi.t[k]));
        }
    }
    SUBCASE("brownian driver: constrained, monotone pushing, zero residual") {
        for (long tag = 0; tag < 20; ++tag) {
            const auto psi = brownian_driver(400, 1e-2, 1, 7, tag);
            const auto sol = sm_1d(psi, 0.0);
            CHECK(sol.phi.x.minCoeff() >= 0.0);
            CHECK(nondecreasing_columns(sol.ell));
            CHECK(sol.ell.x(0, 0) == 0.0);
            CHECK(complementarity_residual(sol, 1e-12) == 0.0);
        }
    }
}

TEST_CASE("multi-dimensional fixed point") {
    SUBCASE("decoupled coordinates reduce to the scalar map") {
        const ReflectionSpec refl(Mat::Zero(3, 3));
        const auto psi = brownian_driver(200, 1e-2, 3, 11, 0);
        Vec x0(3);
        x0 << 0.0, 0.5, 2.0;
        const auto sol = sm_hr(psi, refl, x0);
        for (int j = 0; j < 3; ++j) {
            DiscretePath col = DiscretePath::uniform(200, 1e-2, 1);
            col.x = psi.x.col(j);
            const auto ref = sm_1d(col, x0(j));
            CHECK(max_abs(Mat(sol.phi.x.col(j) - ref.phi.x.col(0))) < 1e-12);
        }
    }
    SUBCASE("scalar reduction is exact on random paths") {
        const ReflectionSpec refl(Mat::Zero(1, 1));
        for (long tag = 0; tag < 100; ++tag) {
            const auto psi = brownian_driver(100, 5e-3, 1, 13, tag);
            const auto a = sm_hr(psi, refl, Vec::Zero(1));
            const auto b = sm_1d(psi, 0.0);
            CHECK(max_abs(Mat(a.phi.x - b.phi.x)) == 0.0);
        }
    }
    SUBCASE("atlas reflection with both coordinates driven negative") {
        const ReflectionSpec refl(reflection::atlas_p(2));
        DiscretePath psi = DiscretePath::uniform(50, 0.02, 2);
        for (int k = 0; k <= 50; ++k) {
            psi.x(k, 0) = -1.5 * psi.t[k];
            psi.x(k, 1) = -0.7 * psi.t[k];
        }
        Vec x0(2);
        x0 << 0.3, 0.1;
        const auto sol = sm_hr(psi, refl, x0);
        CHECK(sol.phi.x.minCoeff() >= -1e-9);  // bounded by the stopping tolerance
        CHECK(nondecreasing_columns(sol.ell));
        CHECK(sol.residual < 1e-8);
        // reflection identity phi = x0 + psi + (I - P^T) ell at every grid point
        const Mat recon = x0.transpose().replicate(51, 1) + psi.x + sol.ell.x -
                          sol.ell.x * refl.P();
        CHECK(max_abs(Mat(recon - sol.phi.x)) < 1e-12);
    }
    SUBCASE("driver monotonicity: larger drivers need less pushing") {
        const ReflectionSpec refl(reflection::atlas_p(4));
        for (long tag = 0; tag < 25; ++tag) {
            const auto psi1 = brownian_driver(120, 1e-2, 4, 17, 2 * tag);
            auto psi2 = psi1;
            NoiseKernel kern(99, NoiseKernel::kScratch);
            for (int k = 0; k <= 120; ++k)
                for (int j = 0; j < 4; ++j)
                    psi2.x(k, j) += kern.uniform(tag, k, j);  // psi2 >= psi1
            const Vec x0 = Vec::Zero(4);
            const auto s1 = sm_hr(psi1, refl, x0);
            const auto s2 = sm_hr(psi2, refl, x0);
            CHECK((s1.ell.x - s2.ell.x).minCoeff() >= -1e-9);
        }
    }
    SUBCASE("idempotence: nonnegative path with no pushing is returned unchanged") {
        const ReflectionSpec refl(reflection::atlas_p(2));
        DiscretePath psi = DiscretePath::uniform(30, 0.05, 2);
        for (int k = 0; k <= 30; ++k) {
            psi.x(k, 0) = 0.2 * psi.t[k];
            psi.x(k, 1) = 0.1 + 0.05 * std::sin(psi.t[k]);
        }
        Vec x0(2);
        x0 << 1.0, 1.0;
        const auto sol = sm_hr(psi, refl, x0);
        CHECK(max_abs(sol.ell.x) == 0.0);
        const Mat expect = x0.transpose().replicate(31, 1) + psi.x;
        CHECK(max_abs(Mat(sol.phi.x - expect)) == 0.0);
    }
    SUBCASE("grid refinement differences shrink on a fixed brownian driver") {
        const ReflectionSpec refl(reflection::atlas_p(2));
        for (long tag = 0; tag < 8; ++tag) {
            const int nfine = 512;
            const auto fine = brownian_driver(nfine, 1.0 / nfine, 2, 23, tag);
            const auto solve_on = [&](int stride) {
                DiscretePath sub =
                    DiscretePath::uniform(nfine / stride, stride * 1.0 / nfine, 2);
                for (int k = 0; k <= nfine / stride; ++k)
                    sub.x.row(k) = fine.x.row(k * stride);
                return sm_hr(sub, refl, Vec::Zero(2));
            };
            const auto s1 = solve_on(4), s2 = solve_on(2), s4 = solve_on(1);
            double d1 = 0.0, d2 = 0.0;  // compared at the coarsest grid points
            for (int k = 0; k <= nfine / 4; ++k) {
                d1 = std::max(d1, (s1.phi.x.row(k) - s4.phi.x.row(4 * k))
                                      .cwiseAbs()
                                      .maxCoeff());
                d2 = std::max(d2, (s2.phi.x.row(2 * k) - s4.phi.x.row(4 * k))
                                      .cwiseAbs()
                                      .maxCoeff());
            }
            CHECK(d2 <= d1 * 1.01 + 1e-9);
        }
    }
}

TEST_CASE("lipschitz probe") {
    SUBCASE("interior shift gives ratio one") {
        const ReflectionSpec refl(reflection::atlas_p(2));
        DiscretePath psi1 = DiscretePath::uniform(40, 0.05, 2);
        auto psi2 = psi1;
        const Vec xa = Vec::Constant(2, 5.0);  // stays interior
        const Vec xb = Vec::Constant(2, 6.0);
        const auto probe = lipschitz_probe(refl, {{psi1, psi2}}, {{xa, xb}});
        REQUIRE(probe.ratios.size() == 1);
        CHECK(probe.ratios[0] == doctest::Approx(1.0));
    }
    SUBCASE("scalar map ratios stay below two") {
        const ReflectionSpec refl(Mat::Zero(1, 1));
        std::vector<std::pair<DiscretePath, DiscretePath>> pairs;
        std::vector<std::pair<Vec, Vec>> starts;
        for (long tag = 0; tag < 1000; ++tag) {
            pairs.emplace_back(brownian_driver(60, 1e-2, 1, 29, 2 * tag),
                               brownian_driver(60, 1e-2, 1, 29, 2 * tag + 1));
            starts.emplace_back(Vec::Zero(1), Vec::Zero(1));
        }
        const auto probe = lipschitz_probe(refl, pairs, starts);
        CHECK(probe.max_ratio <= 2.0 + 1e-12);
        CHECK(probe.ratios.size() == 1000);
    }
    SUBCASE("decoupled coordinates inherit the scalar bound") {
        const ReflectionSpec refl(Mat::Zero(3, 3));
        std::vector<std::pair<DiscretePath, DiscretePath>> pairs;
        std::vector<std::pair<Vec, Vec>> starts;
        for (long tag = 0; tag < 100; ++tag) {
            pairs.emplace_back(brownian_driver(60, 1e-2, 3, 31, 2 * tag),
                               brownian_driver(60, 1e-2, 3, 31, 2 * tag + 1));
            starts.emplace_back(Vec::Zero(3), Vec::Zero(3));
        }
        const auto probe = lipschitz_probe(refl, pairs, starts);
        CHECK(probe.max_ratio <= 2.0 + 1e-12);
    }
    SUBCASE("identical inputs are skipped with notice") {
        const ReflectionSpec refl(Mat::Zero(1, 1));
        const auto psi = brownian_driver(20, 0.05, 1, 37, 0);
        const auto probe =
            lipschitz_probe(refl, {{psi, psi}}, {{Vec::Zero(1), Vec::Zero(1)}});
        CHECK(probe.ratios.empty());
        REQUIRE(probe.skipped.size() == 1);
        CHECK(probe.skipped[0] == 0);
    }
}

TEST_CASE("path serialization") {
    const auto path = brownian_driver(37, 0.013, 3, 41, 5);
    SUBCASE("csv round trip") {
        std::stringstream ss;
        write_csv(path, ss);
        const std::string first = ss.str().substr(0, ss.str().find('\n'));
        CHECK(first == "t,x1,x2,x3");
        ss.seekg(0);
        const auto back = read_csv(ss);
        REQUIRE(back.t.size() == path.t.size());
        // shortest round-trip decimals reproduce every double exactly
        CHECK(max_abs(Mat(back.x - path.x)) == 0.0);
        for (std::size_t k = 0; k < path.t.size(); ++k) CHECK(back.t[k] == path.t[k]);
    }
    SUBCASE("binary round trip is bit-exact") {
        std::stringstream ss;
        write_binary(path, ss);
        ss.seekg(0);
        const auto back = read_binary(ss);
        CHECK(max_abs(Mat(back.x - path.x)) == 0.0);
        CHECK(back.t == path.t);
    }
    SUBCASE("malformed input is rejected") {
        std::stringstream bad("t,x1\n0,1\nnot-a-number,2\n");
        CHECK_THROWS(read_csv(bad));
    }
}
