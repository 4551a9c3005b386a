#include "rbmkit/experiments.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "rbmkit/coupling.hpp"
#include "rbmkit/doa.hpp"
#include "rbmkit/dynamics.hpp"
#include "rbmkit/parallel.hpp"
#include "rbmkit/rates.hpp"
#include "rbmkit/stationary.hpp"

namespace rbmkit::experiments {

using io::Cell;
using io::Config;
using io::Table;
using reflection::RankParams;
using reflection::RbmParams;

namespace {

const std::set<std::string> kGlobalKeys = {"seed",   "workers", "out",
                                           "format", "version", "subcommand"};

std::set<std::string> with_global(std::set<std::string> keys) {
    keys.insert(kGlobalKeys.begin(), kGlobalKeys.end());
    return keys;
}

dynamics::SimConfig sim_from(const Config& cfg, double default_T, double default_dt,
                             int default_paths) {
    dynamics::SimConfig sim;
    sim.T = cfg.get_num("T", default_T);
    sim.dt = cfg.get_num("dt", default_dt);
    sim.n_paths = static_cast<int>(cfg.get_int("paths", default_paths));
    sim.seed = cfg.get_seed("seed", 0);
    sim.workers = static_cast<int>(cfg.get_int("workers", 1));
    return sim;
}

void echo_sim(Config& cfg, const dynamics::SimConfig& sim) {
    cfg.set("T", fmt::format("{}", sim.T));
    cfg.set("dt", fmt::format("{}", sim.dt));
    cfg.set("paths", fmt::format("{}", sim.n_paths));
    cfg.set("seed", fmt::format("{}", sim.seed));
    cfg.set("workers", fmt::format("{}", sim.workers));
}

std::vector<int> uniform_obs_steps(int n_steps, int m_obs) {
    std::vector<int> obs;
    obs.reserve(m_obs + 1);
    for (int j = 0; j <= m_obs; ++j) {
        const int s = static_cast<int>(std::llround(static_cast<double>(j) * n_steps / m_obs));
        if (obs.empty() || s > obs.back()) obs.push_back(s);
    }
    return obs;
}

double parse_suffix_num(const std::string& spec, const std::string& prefix) {
    return std::stod(spec.substr(prefix.size()));
}

std::string timing_line(const char* what, std::chrono::steady_clock::time_point t0) {
    const auto dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0);
    return fmt::format("{}: {:.3f} s\n", what, dt.count());
}

}  // namespace

Mat read_matrix_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open matrix file: " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            char* end = nullptr;
            const double v = std::strtod(tok.c_str(), &end);
            if (end == tok.c_str() || *end != '\0')
                throw std::runtime_error(
                    fmt::format("malformed matrix CSV at line {}: '{}'", lineno, tok));
            row.push_back(v);
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw std::runtime_error(
                fmt::format("ragged matrix CSV at line {}", lineno));
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw std::runtime_error("empty matrix file: " + path);
    Mat m(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
    return m;
}

Mat generator_matrix(const std::string& gen, int d) {
    if (gen == "atlas") return reflection::atlas_p(d);
    if (gen.rfind("asym_atlas:", 0) == 0)
        return reflection::asym_atlas_p(d, parse_suffix_num(gen, "asym_atlas:"));
    if (gen == "identity") return Mat::Zero(d, d);
    if (gen.rfind("custom:", 0) == 0) {
        Mat P = read_matrix_csv(gen.substr(7));
        if (P.rows() != P.cols()) throw std::runtime_error("custom matrix must be square");
        return P;
    }
    throw std::runtime_error("unknown generator: " + gen);
}

Vec parse_vector_spec(const std::string& spec, int d) {
    if (spec == "zeros") return Vec::Zero(d);
    if (spec == "ones") return Vec::Ones(d);
    if (spec == "e1") {
        Vec v = Vec::Zero(d);
        v(0) = 1.0;
        return v;
    }
    if (spec.rfind("const:", 0) == 0)
        return Vec::Constant(d, parse_suffix_num(spec, "const:"));
    std::stringstream ss(spec);
    std::string tok;
    std::vector<double> vals;
    while (std::getline(ss, tok, ',')) vals.push_back(std::stod(tok));
    if (static_cast<int>(vals.size()) != d)
        throw std::runtime_error(
            fmt::format("vector spec '{}' has {} entries, expected {}", spec, vals.size(), d));
    return Eigen::Map<Vec>(vals.data(), d);
}

RbmParams generator_params(const std::string& gen, int d, const Config& cfg) {
    if (gen == "atlas") return RankParams::standard_atlas(d).gap_rbm();
    if (gen.rfind("asym_atlas:", 0) == 0) {
        RankParams rp = RankParams::standard_atlas(d);
        rp.collision_p = parse_suffix_num(gen, "asym_atlas:");
        return rp.gap_rbm();
    }
    const Mat P = generator_matrix(gen, d);
    const Vec mu = parse_vector_spec(cfg.get_str("mu", "const:-1"), d);
    const Vec sd = parse_vector_spec(cfg.get_str("sigma_diag", "ones"), d);
    Mat D = Mat::Zero(d, d);
    for (int i = 0; i < d; ++i) D(i, i) = sd(i);
    return RbmParams(mu, D, reflection::ReflectionSpec(P));
}

namespace {

stationary::ProductExpLaw stationary_for(const std::string& gen, int d) {
    if (gen == "atlas") return stationary::finite_atlas_stationary(d);
    if (gen.rfind("asym_atlas:", 0) == 0)
        return stationary::asym_atlas_stationary(d, parse_suffix_num(gen, "asym_atlas:"));
    throw std::runtime_error("no catalogued stationary law for generator " + gen);
}

}  // namespace

// ---------------------------------------------------------------------------

RunResult run_validate(Config cfg) {
    cfg.reject_unknown(with_global(
        {"gen", "d", "power_cap", "bc", "bc_cap", "df", "k0", "mu", "sigma_diag"}));
    const int d = static_cast<int>(cfg.get_int("d", 5));
    const std::string gen = cfg.get_str("gen", "atlas");
    const int power_cap = static_cast<int>(cfg.get_int("power_cap", 10 * d));

    RunResult res;
    Table t({"key", "value"});
    const Mat P = generator_matrix(gen, d);
    const auto hr = reflection::check_harrison_reiman(P, power_cap);
    t.add_row({std::string("substochastic"), std::string(hr.substochastic ? "true" : "false")});
    const char* trans = hr.transience == reflection::Transience::kCertified ? "true"
                        : hr.transience == reflection::Transience::kNotTransient
                            ? "false"
                            : "undetermined";
    t.add_row({std::string("transient"), std::string(trans)});
    if (hr.cert_power > 0)
        t.add_row({std::string("certificate_power"), static_cast<long long>(hr.cert_power)});
    if (hr.cert_radius >= 0.0)
        t.add_row({std::string("certificate_radius"), hr.cert_radius});
    if (!hr.failure.empty()) t.add_row({std::string("note"), hr.failure});

    bool any_fail = !hr.admissible();
    bool inconclusive = hr.transience == reflection::Transience::kUndetermined;

    if (hr.admissible() && (cfg.get_int("bc", 0) || cfg.get_int("df", 0))) {
        const RbmParams params = generator_params(gen, d, cfg);
        if (cfg.get_int("bc", 0)) {
            const auto bc = reflection::check_bc(
                params, static_cast<int>(cfg.get_int("bc_cap", 200)));
            t.add_row({std::string("bc_kappa"), bc.kappa});
            t.add_row({std::string("bc_beta"), bc.beta});
            t.add_row({std::string("bc_fit_r2"), bc.fit_r2});
            t.add_row({std::string("bc_delta"), bc.delta});
            t.add_row({std::string("bc_sigma"), bc.sigma});
            const bool pass = bc.geometric && bc.drift_holds && bc.diffusion_holds;
            t.add_row({std::string("bc_pass"), std::string(pass ? "true" : "false")});
            any_fail = any_fail || !pass;
        }
        if (cfg.get_int("df", 0)) {
            const int k0 = static_cast<int>(cfg.get_int("k0", std::min(8, d)));
            const auto df = reflection::check_df(params, k0);
            t.add_row({std::string("df_alpha"), df.alpha});
            t.add_row({std::string("df_C"), df.C});
            t.add_row({std::string("df_M"), df.M});
            t.add_row({std::string("df_b0"), df.b0});
            t.add_row({std::string("df_rstar"), df.rstar});
            t.add_row({std::string("df_L1"), df.L1});
            t.add_row({std::string("df_holds_I"), std::string(df.holds_I ? "true" : "false")});
            t.add_row({std::string("df_holds_II"), std::string(df.holds_II ? "true" : "false")});
            t.add_row({std::string("df_holds_III"), std::string(df.holds_III ? "true" : "false")});
            t.add_row({std::string("df_holds_IV"), std::string(df.holds_IV ? "true" : "false")});
            if (df.violation_i > 0) {
                t.add_row({std::string("df_violation_i"), static_cast<long long>(df.violation_i)});
                t.add_row({std::string("df_violation_j"), static_cast<long long>(df.violation_j)});
            }
            any_fail = any_fail || !df.holds();
        }
    }
    res.table = std::move(t);
    cfg.set("gen", gen);
    cfg.set("d", fmt::format("{}", d));
    res.resolved = cfg;
    res.exit_code = any_fail ? 1 : (inconclusive ? 2 : 0);
    if (inconclusive && !any_fail) res.exit_code = 2;
    return res;
}

RunResult run_rates(Config cfg) {
    cfg.reject_unknown(with_global({"preset", "gen", "d", "dgrid", "x", "kappa", "tmin",
                                    "tmax", "tpoints", "t0", "d1", "d2", "mu",
                                    "sigma_diag"}));
    RunResult res;
    const std::string preset = cfg.get_str("preset", "model");
    if (preset == "standard_atlas" || preset == "bc") {
        std::vector<double> dgrid = {2, 4, 8, 16};
        if (cfg.has("dgrid")) dgrid = cfg.get_list("dgrid");
        Table t({"d", "trel_bound"});
        for (double dd : dgrid) {
            const int d = static_cast<int>(dd);
            double trel;
            if (preset == "standard_atlas") {
                // a* = d(d+1) and unit diffusion bound, start at the origin
                trel = rates::atlas_trel_bound(0.0, 0.0, d, d * (d + 1.0), 1.0);
            } else {
                trel = rates::bc_trel_bound(0.0, 0.0, d);
            }
            t.add_row({static_cast<long long>(d), trel});
        }
        res.table = std::move(t);
        res.resolved = cfg;
        return res;
    }
    if (preset != "model") throw std::runtime_error("unknown preset: " + preset);

    const int d = static_cast<int>(cfg.get_int("d", 3));
    const std::string gen = cfg.get_str("gen", "atlas");
    const RbmParams params = generator_params(gen, d, cfg);
    const Vec x = parse_vector_spec(cfg.get_str("x", "zeros"), d);
    const double kappa = cfg.get_num("kappa", 1.0);
    rates::WasFreeConstants free;
    free.t0 = cfg.get_num("t0", 1.0);
    free.d1 = cfg.get_num("d1", 1.0);
    free.d2 = cfg.get_num("d2", 1.0);

    reflection::RateConstants rc;
    if (gen == "atlas" || gen.rfind("asym_atlas:", 0) == 0) {
        RankParams rp = RankParams::standard_atlas(d);
        if (gen.rfind("asym_atlas:", 0) == 0)
            rp.collision_p = parse_suffix_num(gen, "asym_atlas:");
        rc = reflection::rate_constants(rp, x, kappa);
    } else {
        rc = reflection::rate_constants(params, x, kappa);
    }

    const double tstart = rates::was_admissible_time(rc, free);
    const double tmin = cfg.get_num("tmin", tstart);
    const double tmax = cfg.get_num("tmax", 64.0 * std::max(1.0, tstart));
    const int tpoints = static_cast<int>(cfg.get_int("tpoints", 17));
    if (!(tmax > tmin) || tpoints < 2) throw std::runtime_error("bad t grid");

    Table t({"t", "w1_bound"});
    for (int i = 0; i < tpoints; ++i) {
        const double tt = tmin * std::pow(tmax / tmin, static_cast<double>(i) / (tpoints - 1));
        if (tt < tstart) continue;
        t.add_row({tt, rates::was_bound(tt, rc, free)});
    }
    res.table = std::move(t);

    Table s({"key", "value"});
    s.add_row({std::string("n_contraction"), static_cast<long long>(rc.n_contraction)});
    s.add_row({std::string("a_theta"), rc.a_theta});
    s.add_row({std::string("b_theta"), rc.b_theta});
    s.add_row({std::string("R1"), rc.r1});
    s.add_row({std::string("R2"), rc.r2});
    s.add_row({std::string("C1"), rc.c1});
    s.add_row({std::string("C2"), rc.c2});
    s.add_row({std::string("t_admissible"), tstart});
    s.add_row({std::string("trel_bound"), rates::was_trel_bound(rc, free)});
    if (rc.a_star >= 0.0) {
        s.add_row({std::string("a_star"), rc.a_star});
        s.add_row({std::string("sigma_bound"), rc.sigma_bound});
        s.add_row({std::string("trel_bound_rank"),
                   rates::atlas_trel_bound(l1_norm(x), sup_norm(x), d, rc.a_star,
                                           rc.sigma_bound)});
    }
    res.summary = std::move(s);
    res.resolved = cfg;
    return res;
}

RunResult run_simulate(Config cfg) {
    cfg.reject_unknown(with_global(
        {"gen", "d", "x0", "T", "dt", "paths", "m_obs", "mu", "sigma_diag"}));
    const auto t0 = std::chrono::steady_clock::now();
    const int d = static_cast<int>(cfg.get_int("d", 3));
    const std::string gen = cfg.get_str("gen", "atlas");
    const RbmParams params = generator_params(gen, d, cfg);
    dynamics::SimConfig sim = sim_from(cfg, 10.0, 1e-3, 1000);
    const Vec x0 = parse_vector_spec(cfg.get_str("x0", "zeros"), d);
    const int m_obs = static_cast<int>(cfg.get_int("m_obs", 16));

    const auto obs = uniform_obs_steps(sim.n_steps(), m_obs);
    const auto observed = dynamics::simulate_rbm_observed(params, x0, sim, obs);

    Table t({"t", "coord", "mean", "var", "n"});
    for (std::size_t j = 0; j < obs.size(); ++j) {
        for (int c = 0; c < d; ++c) {
            // fixed-order reduction over paths
            double mean = 0.0;
            for (int p = 0; p < sim.n_paths; ++p) mean += observed[j](p, c);
            mean /= sim.n_paths;
            double var = 0.0;
            for (int p = 0; p < sim.n_paths; ++p) {
                const double dev = observed[j](p, c) - mean;
                var += dev * dev;
            }
            var /= std::max(1, sim.n_paths - 1);
            t.add_row({obs[j] * sim.dt, static_cast<long long>(c + 1), mean, var,
                       static_cast<long long>(sim.n_paths)});
        }
    }
    RunResult res;
    res.table = std::move(t);
    echo_sim(cfg, sim);
    res.resolved = cfg;
    res.log = timing_line("simulate", t0);
    return res;
}

namespace {

// Three synchronously driven copies: A from xA, B per-path (fixed vector or
// stationary sample), O from the origin. Emits per-observation means of
// l1(A,B), wl1(A,B), u = |R^{-1}(A-O)|_beta and ubound = u + |R^{-1}(B-O)|_beta.
Table couple_table(const RbmParams& params, const Vec& xA,
                   const std::function<void(long, Vec&)>& xB_init,
                   const dynamics::SimConfig& sim, const std::vector<int>& obs,
                   double beta) {
    const int d = params.dim();
    const int kn = static_cast<int>(params.D().cols());
    const int n = sim.n_steps();
    const double sqdt = std::sqrt(sim.dt);
    const NoiseKernel noise(sim.seed, NoiseKernel::kDynamics);
    const Mat& Rinv = params.refl().Rinv();

    const auto wl1 = [beta](const Vec& v) {
        double acc = 0.0, w = 1.0;
        for (int i = 0; i < v.size(); ++i) {
            w *= beta;
            acc += w * std::abs(v(i));
        }
        return acc;
    };

    const int nobs = static_cast<int>(obs.size());
    Mat acc_l1(sim.n_paths, nobs), acc_wl1(sim.n_paths, nobs), acc_u(sim.n_paths, nobs),
        acc_ub(sim.n_paths, nobs);
    parallel_for(sim.n_paths, sim.workers, [&](long p) {
        dynamics::StepProjector projA(params.refl()), projB(params.refl()),
            projO(params.refl());
        Vec za = xA, zb(d), zo = Vec::Zero(d), y(d), ell(d), dB(kn);
        std::vector<double> xi(kn);
        xB_init(p, zb);
        int next = 0;
        for (int k = 0; k <= n; ++k) {
            while (next < nobs && obs[next] == k) {
                const Vec uA = Rinv * (za - zo);
                const Vec uB = Rinv * (zb - zo);
                acc_l1(p, next) = l1_norm(Vec(za - zb));
                acc_wl1(p, next) = wl1(Vec(za - zb));
                acc_u(p, next) = wl1(uA);
                acc_ub(p, next) = wl1(uA) + wl1(uB);
                ++next;
            }
            if (k == n) break;
            noise.fill_gaussian(p, k, xi.data(), kn);
            for (int j = 0; j < kn; ++j) dB(j) = sqdt * xi[j];
            y = params.mu() * sim.dt + params.D() * dB;
            projA.step(za, y, ell);
            projB.step(zb, y, ell);
            projO.step(zo, y, ell);
        }
    });

    Table t({"t", "l1", "wl1", "u", "ubound"});
    for (int j = 0; j < nobs; ++j) {
        double m1 = 0.0, m2 = 0.0, m3 = 0.0, m4 = 0.0;
        for (int p = 0; p < sim.n_paths; ++p) {
            m1 += acc_l1(p, j);
            m2 += acc_wl1(p, j);
            m3 += acc_u(p, j);
            m4 += acc_ub(p, j);
        }
        t.add_row({obs[j] * sim.dt, m1 / sim.n_paths, m2 / sim.n_paths, m3 / sim.n_paths,
                   m4 / sim.n_paths});
    }
    return t;
}

}  // namespace

RunResult run_couple(Config cfg) {
    cfg.reject_unknown(with_global(
        {"gen", "d", "xA", "xB", "T", "dt", "paths", "beta", "m_obs", "mu", "sigma_diag"}));
    const auto tstart = std::chrono::steady_clock::now();
    const int d = static_cast<int>(cfg.get_int("d", 3));
    const std::string gen = cfg.get_str("gen", "atlas");
    const RbmParams params = generator_params(gen, d, cfg);
    dynamics::SimConfig sim = sim_from(cfg, 20.0, 1e-3, 2000);
    const Vec xA = parse_vector_spec(cfg.get_str("xA", "zeros"), d);
    const double beta = cfg.get_num("beta", 1.0);
    const int m_obs = static_cast<int>(cfg.get_int("m_obs", 32));
    const auto obs = uniform_obs_steps(sim.n_steps(), m_obs);

    const std::string xb_spec = cfg.get_str("xB", "e1");
    std::function<void(long, Vec&)> xb_init;
    if (xb_spec == "stationary") {
        const auto law = stationary_for(gen, d);
        const NoiseKernel kern(sim.seed, NoiseKernel::kInitial);
        xb_init = [law, kern](long p, Vec& z) {
            for (int i = 0; i < z.size(); ++i)
                z(i) = kern.exponential(law.rates(i), p, i, 0);
        };
    } else {
        const Vec xB = parse_vector_spec(xb_spec, d);
        if (xB.minCoeff() < 0.0) throw std::runtime_error("xB must be nonnegative");
        xb_init = [xB](long, Vec& z) { z = xB; };
    }

    RunResult res;
    res.table = couple_table(params, xA, xb_init, sim, obs, beta);
    echo_sim(cfg, sim);
    cfg.set("beta", fmt::format("{}", beta));
    res.resolved = cfg;
    res.log = fmt::format("couple gen={} d={} paths={} steps={}\n", gen, d, sim.n_paths,
                          sim.n_steps()) +
              timing_line("couple", tstart);
    return res;
}

RunResult run_stattest(Config cfg) {
    cfg.reject_unknown(with_global({"gen", "d", "T", "dt", "paths", "start", "mu",
                                    "sigma_diag", "sigma", "x0"}));
    const auto tstart = std::chrono::steady_clock::now();
    const std::string gen = cfg.get_str("gen", "atlas");
    RunResult res;
    Table t({"coord", "ks", "pvalue", "n"});

    if (gen == "rbm1d") {
        // scalar RBM against its exponential stationary law
        dynamics::SimConfig sim = sim_from(cfg, 10.0, 1e-3, 100000);
        const double mu = cfg.get_num("mu", -1.0);
        const double sigma = cfg.get_num("sigma", 1.0);
        if (!(mu < 0.0)) throw std::runtime_error("rbm1d needs negative drift");
        const double x0 = cfg.get_num("x0", 0.0);
        const Vec xs = dynamics::rbm1d_terminal(mu, sigma, x0, sim);
        const auto ks = stationary::ks_exponential(xs, 2.0 * std::abs(mu) / (sigma * sigma));
        t.add_row({static_cast<long long>(1), ks.statistic, ks.p_value,
                   static_cast<long long>(ks.n)});
        echo_sim(cfg, sim);
    } else {
        const int d = static_cast<int>(cfg.get_int("d", 3));
        dynamics::SimConfig sim = sim_from(cfg, 30.0, 1e-3, 100000);
        const auto law = stationary_for(gen, d);
        const std::string start = cfg.get_str("start", "mean");
        Vec z0;
        if (start == "mean")
            z0 = law.mean();
        else
            z0 = parse_vector_spec(start, d);

        Mat gaps;
        if (gen == "atlas") {
            gaps = dynamics::rank_terminal_gaps(RankParams::standard_atlas(d),
                                                dynamics::positions_from_gaps(z0), sim);
        } else {
            const double p = parse_suffix_num(gen, "asym_atlas:");
            gaps = dynamics::asym_atlas_terminal_gaps(p, d, z0, sim);
        }
        for (int c = 0; c < d; ++c) {
            const auto ks = stationary::ks_marginal(law, gaps, c);
            t.add_row({static_cast<long long>(c + 1), ks.statistic, ks.p_value,
                       static_cast<long long>(ks.n)});
        }
        echo_sim(cfg, sim);
    }
    res.table = std::move(t);
    res.resolved = cfg;
    res.log = timing_line("stattest", tstart);
    return res;
}

RunResult run_doa(Config cfg) {
    cfg.reject_unknown(with_global({"scenario", "initial.kind", "initial.params", "target",
                                    "d", "k_watch", "horizon", "dt", "m_obs", "replicates",
                                    "grid_top", "paths", "T"}));
    const auto tstart = std::chrono::steady_clock::now();
    RunResult res;
    const std::string scenario = cfg.get_str("scenario", "");

    if (scenario == "star_counterexample" || scenario == "zero_gap") {
        const int reps = static_cast<int>(cfg.get_int("replicates", 4));
        const auto seed = cfg.get_seed("seed", 0);
        Table t({"condition", "verdict", "tail_slope", "value_at_top"});
        auto add = [&t](const char* name, const doa::TrendReport& rep) {
            t.add_row({std::string(name), std::string(doa::to_string(rep.verdict)),
                       rep.tail_slope, rep.values.back()});
        };
        doa::SequenceSampler seq;
        if (scenario == "star_counterexample")
            seq = [](long, long i) { return doa::cube_spike_sequence(i); };
        else
            seq = [](long, long i) { return i == 1 ? 0.0 : 1.0; };

        const auto star_grid = doa::default_d_grid(
            static_cast<long>(cfg.get_int("grid_top", 1000000)));
        const auto star =
            doa::check_star(doa::independent_pi_coupling(seq, seed), star_grid, reps);
        add("star", star);
        const auto d1d3_grid = doa::default_d_grid(
            static_cast<long>(cfg.get_int("grid_top", 1000000)) * 10);
        const auto d1d3 = doa::check_d1_d3(
            seq, 1.0, [](double m) { return std::log(m); }, d1d3_grid, 1);
        add("d1", d1d3.d1);
        add("d2", d1d3.d2);
        add("d3", d1d3.d3);
        res.table = std::move(t);
        res.resolved = cfg;
        res.log = timing_line("doa-checkers", tstart);
        return res;
    }

    // time-averaged law experiment on the truncated Atlas system
    doa::DoaExperimentConfig dcfg;
    dcfg.d = static_cast<int>(cfg.get_int("d", 16));
    dcfg.k_watch = static_cast<int>(cfg.get_int("k_watch", 3));
    dcfg.m_obs = static_cast<int>(cfg.get_int("m_obs", 64));
    dcfg.sim = sim_from(cfg, cfg.get_num("horizon", 20.0), 2e-3, 1000);
    const auto seed = dcfg.sim.seed;

    const std::string target_spec = cfg.get_str("target", "atlas");
    stationary::ProductExpLaw target;
    if (target_spec == "atlas")
        target = stationary::finite_atlas_stationary(dcfg.d);
    else if (target_spec.rfind("pi_a:", 0) == 0)
        target = stationary::pi_a(parse_suffix_num(target_spec, "pi_a:"), dcfg.d);
    else {
        const auto rates = io::Config::parse_string("r = " + target_spec).get_list("r");
        target.rates = Eigen::Map<const Vec>(rates.data(), rates.size());
        target.provenance = "custom";
        target.validate();
    }

    const std::string kind = cfg.get_str("initial.kind", "product-exp");
    const std::string kparams = cfg.get_str("initial.params", "target");
    doa::InitialGapSpec initial = doa::InitialGapSpec::deterministic(target.mean());
    if (kind == "product-exp") {
        if (kparams == "target")
            initial = doa::InitialGapSpec::product_exp(target, seed);
        else if (kparams.rfind("const:", 0) == 0) {
            stationary::ProductExpLaw law;
            law.rates = Vec::Constant(dcfg.d, parse_suffix_num(kparams, "const:"));
            law.provenance = "custom";
            initial = doa::InitialGapSpec::product_exp(law, seed);
        } else
            throw std::runtime_error("unsupported initial.params for product-exp");
    } else if (kind == "perturbed-stationary") {
        const double bp = kparams.rfind("beta:", 0) == 0
                              ? parse_suffix_num(kparams, "beta:")
                              : 1.0;
        initial = doa::InitialGapSpec::perturbed_stationary(
            stationary::finite_atlas_stationary(dcfg.d), bp, seed);
    } else if (kind == "deterministic-sequence") {
        if (kparams == "cube_spike")
            initial = doa::InitialGapSpec::sequence(
                [](long i) { return doa::cube_spike_sequence(i); }, dcfg.d);
        else if (kparams.rfind("const:", 0) == 0)
            initial = doa::InitialGapSpec::sequence(
                [c = parse_suffix_num(kparams, "const:")](long) { return c; }, dcfg.d);
        else
            throw std::runtime_error("unsupported initial.params for sequence");
    } else if (kind != "target-mean") {
        throw std::runtime_error("unknown initial.kind: " + kind);
    }

    const auto est = doa::run_doa_experiment(initial, target, dcfg);
    Table t({"t", "coord", "w1", "null_q95"});
    for (std::size_t j = 0; j < est.t.size(); ++j)
        for (int c = 0; c < dcfg.k_watch; ++c)
            t.add_row({est.t[j], static_cast<long long>(c + 1), est.w1(j, c),
                       est.null_q95(c)});
    res.table = std::move(t);
    echo_sim(cfg, dcfg.sim);
    res.resolved = cfg;
    res.log = fmt::format("doa d={} k_watch={} paths={}\n", dcfg.d, dcfg.k_watch,
                          dcfg.sim.n_paths) +
              timing_line("doa", tstart);
    return res;
}

RunResult run_subcommand(const std::string& name, Config cfg) {
    if (name == "validate") return run_validate(std::move(cfg));
    if (name == "rates") return run_rates(std::move(cfg));
    if (name == "simulate") return run_simulate(std::move(cfg));
    if (name == "couple") return run_couple(std::move(cfg));
    if (name == "stattest") return run_stattest(std::move(cfg));
    if (name == "doa") return run_doa(std::move(cfg));
    throw std::runtime_error("unknown subcommand: " + name);
}

void emit(const RunResult& res, const std::string& subcommand, const std::string& out_dir,
          const std::string& format) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    const std::string ext = format == "json" ? "json" : "csv";
    const auto render = [&](const io::Table& t) {
        return format == "json" ? io::to_json(t) : io::to_csv(t);
    };
    io::write_text_file(fmt::format("{}/{}.{}", out_dir, subcommand, ext),
                        render(res.table));
    if (!res.summary.columns.empty())
        io::write_text_file(fmt::format("{}/{}_summary.{}", out_dir, subcommand, ext),
                            render(res.summary));
    io::write_text_file(out_dir + "/manifest.cfg",
                        io::manifest_text(subcommand, res.resolved));
    if (!res.log.empty()) io::write_text_file(out_dir + "/run.log", res.log);
}

}  // namespace rbmkit::experiments
