#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "rbmkit/doa.hpp"

using namespace rbmkit;
using namespace rbmkit::doa;
using stationary::ProductExpLaw;

namespace {
SequenceSampler exp_iid(double rate, std::uint64_t seed) {
    NoiseKernel kern(seed, NoiseKernel::kScratch);
    return [rate, kern](long r, long i) { return kern.exponential(rate, r, i, 7); };
}
}  // namespace

TEST_CASE("minimum-sum condition") {
    const auto grid = default_d_grid(1000000);
    SUBCASE("independent unit-rate pairs diverge, matching the analytic mean 1/4") {
        const auto rep = check_star(independent_pi_coupling(exp_iid(2.0, 1), 2), grid, 4);
        CHECK(rep.verdict == Verdict::kPass);
        CHECK(rep.tail_slope > 0.3);
        // law of large numbers: S_d ~ (d/4) / (sqrt(d) log d)
        const double d = rep.d_grid.back();
        CHECK(rep.values.back() ==
              doctest::Approx(0.25 * std::sqrt(d) / std::log(d)).epsilon(0.05));
    }
    SUBCASE("cube-spike counterexample fails") {
        const auto rep = check_star(
            independent_pi_coupling([](long, long i) { return cube_spike_sequence(i); },
                                    2),
            grid, 2);
        CHECK(rep.verdict == Verdict::kFail);
        CHECK(rep.tail_slope < -0.05);
    }
    SUBCASE("all-zero configuration fails") {
        const auto rep =
            check_star(independent_pi_coupling([](long, long) { return 0.0; }, 2), grid, 1);
        CHECK(rep.verdict == Verdict::kFail);
    }
    SUBCASE("metamorphic: dominating first coordinate saturates the minimum") {
        NoiseKernel kern(11, NoiseKernel::kScratch);
        const PairSampler dominated = [kern](long r, long i) -> std::array<double, 2> {
            const double v = kern.exponential(2.0, r, i, 0);
            return {v + 1.0, v};
        };
        const PairSampler same = [kern](long r, long i) -> std::array<double, 2> {
            const double v = kern.exponential(2.0, r, i, 0);
            return {v, v};
        };
        const auto a = check_star(dominated, grid, 2);
        const auto b = check_star(same, grid, 2);
        for (std::size_t i = 0; i < a.values.size(); ++i)
            CHECK(a.values[i] == b.values[i]);
    }
    SUBCASE("deterministic given seed and grid") {
        const auto a = check_star(independent_pi_coupling(exp_iid(2.0, 5), 9), grid, 2);
        const auto b = check_star(independent_pi_coupling(exp_iid(2.0, 5), 9), grid, 2);
        CHECK(a.values == b.values);
    }
}

TEST_CASE("entropy-method conditions") {
    const auto log_theta = [](double m) { return std::log(m); };
    SUBCASE("cube-spike sequence passes all three with beta 1, theta log") {
        const auto rep = check_d1_d3(
            [](long, long i) { return cube_spike_sequence(i); }, 1.0, log_theta,
            default_d_grid(10000000), 1);
        CHECK(rep.d1.verdict == Verdict::kPass);
        CHECK(rep.d2.verdict == Verdict::kPass);
        CHECK(rep.d3.verdict == Verdict::kPass);
        CHECK(!rep.zero_gap);
    }
    SUBCASE("iid exponential gaps pass") {
        const auto rep = check_d1_d3(exp_iid(2.0, 21), 1.0, log_theta,
                                     default_d_grid(1000000), 1);
        CHECK(rep.d1.verdict == Verdict::kPass);
        CHECK(rep.d2.verdict == Verdict::kPass);
        CHECK(rep.d3.verdict == Verdict::kPass);
    }
    SUBCASE("one zero gap breaks the log-moment condition") {
        const auto rep = check_d1_d3(
            [](long, long i) { return i == 1 ? 0.0 : 1.0; }, 1.0, log_theta,
            default_d_grid(100000), 1);
        CHECK(rep.zero_gap);
        CHECK(rep.d2.verdict == Verdict::kFail);
        CHECK(rep.d1.verdict == Verdict::kPass);
    }
    SUBCASE("linear growth breaks the prefix-sum bound") {
        const auto rep = check_d1_d3(
            [](long, long i) { return static_cast<double>(i); }, 1.0, log_theta,
            default_d_grid(100000), 1);
        CHECK(rep.d1.verdict == Verdict::kFail);
    }
    SUBCASE("domain guards") {
        CHECK_THROWS(check_d1_d3(exp_iid(1.0, 1), 2.5, log_theta,
                                 default_d_grid(10000), 1));
        // theta below log m is rejected when beta = 1
        CHECK_THROWS(check_d1_d3(exp_iid(1.0, 1), 1.0,
                                 [](double m) { return std::sqrt(std::log(m)); },
                                 default_d_grid(10000), 1));
        // eventually decreasing theta is rejected
        CHECK_THROWS(check_d1_d3(exp_iid(1.0, 1), 1.5,
                                 [](double m) { return 1.0 / m; },
                                 default_d_grid(10000), 1));
    }
}

TEST_CASE("coupled-family conditions") {
    const auto grid = default_d_grid(1000000);
    SUBCASE("law coupled to itself passes with a vanishing sum") {
        const double a = 0.5;
        const auto rep = check_stara(
            comonotone_exp_coupling([a](long i) { return 2.0 + i * a; }, a, 3), a,
            grid, 2);
        CHECK(rep.coupling_sum.verdict == Verdict::kPass);
        CHECK(rep.edge_ratio.verdict == Verdict::kPass);
        CHECK(rep.verdict == Verdict::kPass);
        for (double v : rep.coupling_sum.values) CHECK(v == 0.0);
    }
    SUBCASE("mismatched slope parameter fails") {
        const double a = 0.5, aprime = 1.0;
        const auto rep = check_stara(
            comonotone_exp_coupling([aprime](long i) { return 2.0 + i * aprime; }, a, 3),
            a, grid, 2);
        CHECK(rep.coupling_sum.verdict == Verdict::kFail);
        CHECK(rep.verdict == Verdict::kFail);
    }
}

TEST_CASE("perturbed-rate admissibility") {
    const auto grid = default_d_grid(10000000);
    SUBCASE("zero perturbation passes") {
        const auto rep = check_aexp([](long) { return 0.0; }, 1.0, grid);
        CHECK(rep.verdict == Verdict::kPass);
    }
    SUBCASE("linear perturbation fails") {
        const auto rep = check_aexp([](long i) { return static_cast<double>(i); },
                                    1.0, grid);
        CHECK(rep.trend.verdict == Verdict::kFail);
    }
    SUBCASE("i over log i satisfies the sufficient growth bound") {
        const auto rep = check_aexp(
            [](long i) { return i < 3 ? 0.0 : i / std::log(static_cast<double>(i)); },
            1.0, grid);
        CHECK(rep.trend.verdict == Verdict::kPass);
        CHECK(rep.window_ok);
    }
    SUBCASE("i over loglog i decays too slowly to certify") {
        const auto rep = check_aexp(
            [](long i) {
                return i < 16 ? 0.0
                              : i / std::log(std::log(static_cast<double>(i)));
            },
            1.0, grid);
        CHECK(rep.trend.verdict != Verdict::kPass);
    }
    SUBCASE("rate positivity enforced with the violating index") {
        CHECK_THROWS_WITH_AS(
            check_aexp([](long i) { return i == 5 ? -8.0 : 0.0; }, 0.0,
                       default_d_grid(10000)),
            doctest::Contains("index 5"), std::invalid_argument);
    }
}

TEST_CASE("wasserstein distance to an exponential") {
    SUBCASE("single-atom closed form") {
        // integral of F below x plus the upper tail: x + (2 e^{-lx} - 1)/l
        const double lam = 2.0, x = 1.0;
        const double expect = x + (2.0 * std::exp(-lam * x) - 1.0) / lam;
        CHECK(w1_to_exponential({{x, 1.0}}, lam) == doctest::Approx(expect));
    }
    SUBCASE("scale equivariance is exact") {
        std::vector<std::pair<double, double>> s1, s2;
        NoiseKernel kern(3, NoiseKernel::kScratch);
        for (int i = 0; i < 500; ++i) {
            const double e = kern.exponential(1.0, i, 0, 0);
            s1.emplace_back(e, 1.0);
            s2.emplace_back(e / 3.0, 1.0);
        }
        CHECK(w1_to_exponential(s2, 3.0) ==
              doctest::Approx(w1_to_exponential(s1, 1.0) / 3.0).epsilon(1e-12));
    }
    SUBCASE("large same-law samples sit near zero") {
        std::vector<std::pair<double, double>> s;
        NoiseKernel kern(9, NoiseKernel::kScratch);
        for (int i = 0; i < 40000; ++i) s.emplace_back(kern.exponential(2.0, i, 0, 0), 1.0);
        CHECK(w1_to_exponential(s, 2.0) < 0.01);
    }
}

TEST_CASE("time-averaged law experiments") {
    SUBCASE("stationary start stays inside the sampling-noise band") {
        DoaExperimentConfig cfg;
        cfg.d = 6;
        cfg.k_watch = 2;
        cfg.m_obs = 8;
        cfg.sim = {2e-3, 10.0, 400, 31, 2};
        const auto target = stationary::finite_atlas_stationary(cfg.d);
        const auto est = run_doa_experiment(
            InitialGapSpec::product_exp(target, cfg.sim.seed), target, cfg);
        REQUIRE(est.t.size() == 8);
        for (std::size_t j = 0; j < est.t.size(); ++j)
            for (int c = 0; c < cfg.k_watch; ++c) CHECK(est.w1(j, c) <= est.null_q95(c));
    }
    SUBCASE("dominating start drifts toward the target") {
        DoaExperimentConfig cfg;
        cfg.d = 12;
        cfg.k_watch = 2;
        cfg.m_obs = 8;
        cfg.sim = {2e-3, 30.0, 400, 37, 2};
        const auto target = stationary::finite_atlas_stationary(cfg.d);
        ProductExpLaw ones;
        ones.rates = Vec::Constant(cfg.d, 1.0);
        ones.provenance = "custom";
        const auto est =
            run_doa_experiment(InitialGapSpec::product_exp(ones, cfg.sim.seed), target, cfg);
        for (int c = 0; c < cfg.k_watch; ++c)
            CHECK(est.w1(est.t.size() - 1, c) < est.w1(0, c));
    }
    SUBCASE("perturbed stationary start decays with a negative fitted slope") {
        DoaExperimentConfig cfg;
        cfg.d = 10;
        cfg.k_watch = 1;
        cfg.m_obs = 8;
        cfg.sim = {2e-3, 20.0, 600, 41, 2};
        const auto target = stationary::finite_atlas_stationary(cfg.d);
        const auto est = run_doa_experiment(
            InitialGapSpec::perturbed_stationary(target, 1.0, cfg.sim.seed), target, cfg);
        Eigen::ArrayXd lt(est.t.size()), lw(est.t.size());
        for (std::size_t j = 0; j < est.t.size(); ++j) {
            lt(j) = std::log(est.t[j]);
            lw(j) = std::log(std::max(est.w1(j, 0), 1e-12));
        }
        CHECK(ls_slope(lt, lw) < 0.0);
        CHECK(est.w1(est.t.size() - 1, 0) < est.w1(0, 0));
    }
    SUBCASE("membership surrogate recorded") {
        DoaExperimentConfig cfg;
        cfg.d = 8;
        cfg.k_watch = 1;
        cfg.m_obs = 4;
        cfg.sim = {5e-3, 1.0, 50, 43, 1};
        const auto target = stationary::finite_atlas_stationary(cfg.d);
        const auto est = run_doa_experiment(
            InitialGapSpec::product_exp(target, cfg.sim.seed), target, cfg);
        CHECK(est.membership_q100 > 0.0);
        CHECK(est.membership_q100 <= cfg.d);
        CHECK(est.membership_q25 <= est.membership_q100);
    }
}
