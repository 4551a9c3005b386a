#include "rbmkit/doa.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "rbmkit/parallel.hpp"
#include "rbmkit/rng.hpp"

namespace rbmkit::doa {

const char* to_string(Verdict v) {
    switch (v) {
        case Verdict::kPass: return "pass";
        case Verdict::kFail: return "fail";
        default: return "inconclusive";
    }
}

namespace {

// Tail of the grid used for limsup/liminf surrogates: points >= d_max / 4.
std::pair<Eigen::ArrayXd, Eigen::ArrayXd> tail_log_points(
    const std::vector<double>& d_grid, const std::vector<double>& values) {
    const double cutoff = d_grid.back() / 4.0;
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < d_grid.size(); ++i) {
        if (d_grid[i] >= cutoff && values[i] > 0.0) {
            xs.push_back(std::log(d_grid[i]));
            ys.push_back(std::log(values[i]));
        }
    }
    Eigen::ArrayXd ax = Eigen::Map<Eigen::ArrayXd>(xs.data(), xs.size());
    Eigen::ArrayXd ay = Eigen::Map<Eigen::ArrayXd>(ys.data(), ys.size());
    return {ax, ay};
}

double tail_slope(const TrendReport& rep) {
    auto [ax, ay] = tail_log_points(rep.d_grid, rep.values);
    if (ax.size() < 2) return 0.0;
    return ls_slope(ax, ay);
}

bool essentially_zero(const TrendReport& rep) {
    double m = 0.0;
    for (double v : rep.values) m = std::max(m, std::abs(v));
    return m <= 1e-12;
}

void check_grid(const std::vector<long>& d_grid) {
    if (d_grid.size() < 3) throw std::invalid_argument("grid needs at least 3 points");
    for (std::size_t i = 0; i < d_grid.size(); ++i)
        if (d_grid[i] < 16 || (i > 0 && d_grid[i] <= d_grid[i - 1]))
            throw std::invalid_argument("grid must be increasing with entries >= 16");
}

}  // namespace

PairSampler independent_pi_coupling(SequenceSampler u, std::uint64_t seed) {
    NoiseKernel kern(seed, NoiseKernel::kScratch);
    return [u = std::move(u), kern](long r, long i) -> std::array<double, 2> {
        return {u(r, i), kern.exponential(2.0, r, i, 1)};
    };
}

PairSampler comonotone_exp_coupling(std::function<double(long i)> u_rate, double a,
                                    std::uint64_t seed) {
    NoiseKernel kern(seed, NoiseKernel::kScratch);
    return [u_rate = std::move(u_rate), a, kern](long r, long i) -> std::array<double, 2> {
        const double e = -std::log(kern.uniform(r, i, 0));  // shared Exp(1) draw
        return {e / u_rate(i), e / (2.0 + i * a)};
    };
}

double cube_spike_sequence(long i) {
    const long n = std::lround(std::cbrt(static_cast<double>(i)));
    if (n > 0 && n * n * n == i) return static_cast<double>(n);
    return std::pow(static_cast<double>(i), -2.0 / 3.0);
}

TrendReport check_star(const PairSampler& coupling, const std::vector<long>& d_grid,
                       int replicates) {
    check_grid(d_grid);
    if (replicates < 1) throw std::invalid_argument("need at least one replicate");
    TrendReport rep;
    rep.d_grid.assign(d_grid.begin(), d_grid.end());
    rep.values.assign(d_grid.size(), 0.0);
    for (long r = 0; r < replicates; ++r) {
        double acc = 0.0;
        std::size_t g = 0;
        for (long i = 1; i <= d_grid.back() && g < d_grid.size(); ++i) {
            const auto uv = coupling(r, i);
            acc += std::min(uv[0], uv[1]);
            while (g < d_grid.size() && d_grid[g] == i) {
                const double dd = static_cast<double>(i);
                rep.values[g] += acc / (std::sqrt(dd) * std::log(dd)) / replicates;
                ++g;
            }
        }
    }
    if (essentially_zero(rep)) {
        rep.verdict = Verdict::kFail;
        return rep;
    }
    rep.tail_slope = tail_slope(rep);
    rep.verdict = rep.tail_slope >= 0.05   ? Verdict::kPass
                  : rep.tail_slope <= -0.05 ? Verdict::kFail
                                            : Verdict::kInconclusive;
    return rep;
}

D1D3Report check_d1_d3(const SequenceSampler& z0, double beta,
                       const std::function<double(double)>& theta,
                       const std::vector<long>& d_grid, int replicates) {
    check_grid(d_grid);
    if (!(beta >= 1.0 && beta < 2.0))
        throw std::invalid_argument("beta must lie in [1, 2)");
    // Probe theta on the grid: eventually nondecreasing, bounded step ratio,
    // and >= log m when beta = 1.
    for (std::size_t i = 1; i < d_grid.size(); ++i) {
        const double t0 = theta(static_cast<double>(d_grid[i - 1]));
        const double t1 = theta(static_cast<double>(d_grid[i]));
        if (!(t0 > 0.0 && t1 > 0.0)) throw std::invalid_argument("theta must be positive");
        if (i + 1 >= d_grid.size() / 2 && t1 < t0)
            throw std::invalid_argument("theta must be eventually nondecreasing");
        if (t0 / t1 < 1e-6) throw std::invalid_argument("theta step ratio degenerate");
    }
    if (beta == 1.0)
        for (long dpt : d_grid)
            if (theta(static_cast<double>(dpt)) <
                std::log(static_cast<double>(dpt)) * (1.0 - 1e-12))
                throw std::invalid_argument("theta(m) >= log m required when beta = 1");

    D1D3Report out;
    for (TrendReport* rep : {&out.d1, &out.d2, &out.d3}) {
        rep->d_grid.assign(d_grid.begin(), d_grid.end());
        rep->values.assign(d_grid.size(), 0.0);
    }
    const double expo3 = beta * beta / (1.0 + beta);
    for (long r = 0; r < replicates; ++r) {
        double sum = 0.0, logsum = 0.0;
        std::size_t g = 0;
        for (long i = 1; i <= d_grid.back() && g < d_grid.size(); ++i) {
            const double z = z0(r, i);
            if (z < 0.0) throw std::invalid_argument("gaps must be nonnegative");
            if (z == 0.0)
                out.zero_gap = true;  // (log 0)_- is infinite past this index
            else
                logsum += std::max(0.0, -std::log(z));
            sum += z;
            while (g < d_grid.size() && d_grid[g] == i) {
                const double m = static_cast<double>(i);
                const double th = theta(m);
                out.d1.values[g] += sum / (std::pow(m, beta) * th) / replicates;
                out.d2.values[g] += logsum / (std::pow(m, beta) * th) / replicates;
                out.d3.values[g] += sum / (std::pow(m, expo3) * th) / replicates;
                ++g;
            }
        }
    }
    auto bounded_verdict = [](TrendReport& rep) {
        rep.tail_slope = tail_slope(rep);
        rep.verdict = rep.tail_slope <= 0.05 ? Verdict::kPass : Verdict::kFail;
    };
    bounded_verdict(out.d1);
    bounded_verdict(out.d2);
    if (out.zero_gap) out.d2.verdict = Verdict::kFail;
    out.d3.tail_slope = tail_slope(out.d3);
    out.d3.verdict = essentially_zero(out.d3) ? Verdict::kFail
                     : out.d3.tail_slope >= 0.05
                         ? Verdict::kPass
                         : (out.d3.tail_slope <= -0.05 ? Verdict::kFail
                                                       : Verdict::kInconclusive);
    return out;
}

StaraReport check_stara(const PairSampler& coupling, double a,
                        const std::vector<long>& d_grid, int replicates) {
    check_grid(d_grid);
    if (!(a > 0.0)) throw std::invalid_argument("a must be positive");
    StaraReport out;
    out.coupling_sum.d_grid.assign(d_grid.begin(), d_grid.end());
    out.coupling_sum.values.assign(d_grid.size(), 0.0);
    out.edge_ratio.d_grid = out.coupling_sum.d_grid;
    out.edge_ratio.values.assign(d_grid.size(), 0.0);
    for (long r = 0; r < replicates; ++r) {
        double acc = 0.0;
        std::size_t g = 0;
        for (long i = 1; i <= d_grid.back() && g < d_grid.size(); ++i) {
            const auto uv = coupling(r, i);
            acc += std::abs(uv[1] - uv[0]);
            while (g < d_grid.size() && d_grid[g] == i) {
                const double dd = static_cast<double>(i);
                out.coupling_sum.values[g] +=
                    std::log(std::log(dd)) / std::log(dd) * acc / replicates;
                out.edge_ratio.values[g] += uv[0] / (dd * uv[1]) / replicates;
                ++g;
            }
        }
    }
    // First limit wants exactly 0: a vanishing tail or a clearly negative trend.
    if (essentially_zero(out.coupling_sum)) {
        out.coupling_sum.verdict = Verdict::kPass;
    } else {
        out.coupling_sum.tail_slope = tail_slope(out.coupling_sum);
        out.coupling_sum.verdict = out.coupling_sum.tail_slope <= -0.03 ? Verdict::kPass
                                   : out.coupling_sum.tail_slope >= -0.02
                                       ? Verdict::kFail
                                       : Verdict::kInconclusive;
    }
    out.edge_ratio.tail_slope = tail_slope(out.edge_ratio);
    out.edge_ratio.verdict = essentially_zero(out.edge_ratio) ||
                                     out.edge_ratio.tail_slope <= 0.05
                                 ? Verdict::kPass
                                 : Verdict::kFail;
    if (out.coupling_sum.verdict == Verdict::kPass &&
        out.edge_ratio.verdict == Verdict::kPass)
        out.verdict = Verdict::kPass;
    else if (out.coupling_sum.verdict == Verdict::kFail ||
             out.edge_ratio.verdict == Verdict::kFail)
        out.verdict = Verdict::kFail;
    return out;
}

AexpReport check_aexp(const std::function<double(long)>& lambda, double a,
                      const std::vector<long>& d_grid) {
    check_grid(d_grid);
    if (a < 0.0) throw std::invalid_argument("a must be nonnegative");
    AexpReport out;
    out.trend.d_grid.assign(d_grid.begin(), d_grid.end());
    out.trend.values.assign(d_grid.size(), 0.0);
    double acc = 0.0;
    std::size_t g = 0;
    double win_lo = std::numeric_limits<double>::infinity();
    double win_hi = -std::numeric_limits<double>::infinity();
    const double tail_cut = d_grid.back() / 4.0;
    for (long i = 1; i <= d_grid.back() && g < d_grid.size(); ++i) {
        const double li = lambda(i);
        if (!(li > -(2.0 + i * a)))
            throw std::invalid_argument(
                fmt::format("rate positivity violated at index {}: lambda = {}", i, li));
        acc += std::abs(li) / (static_cast<double>(i) * i);
        if (static_cast<double>(i) >= tail_cut) {
            win_lo = std::min(win_lo, li / i);
            win_hi = std::max(win_hi, li / i);
        }
        while (g < d_grid.size() && d_grid[g] == i) {
            const double dd = static_cast<double>(i);
            out.trend.values[g] = std::log(std::log(dd)) / std::log(dd) * acc;
            ++g;
        }
    }
    out.window_low = win_lo;
    out.window_high = win_hi;
    out.window_ok = win_lo > -a && std::isfinite(win_hi);
    if (essentially_zero(out.trend)) {
        out.trend.verdict = Verdict::kPass;
    } else {
        out.trend.tail_slope = tail_slope(out.trend);
        out.trend.verdict = out.trend.tail_slope <= -0.01 ? Verdict::kPass
                            : out.trend.tail_slope >= 0.01 ? Verdict::kFail
                                                           : Verdict::kInconclusive;
    }
    out.verdict = !out.window_ok && out.trend.verdict == Verdict::kPass
                      ? Verdict::kInconclusive
                      : out.trend.verdict;
    return out;
}

// ---------------------------------------------------------------------------

InitialGapSpec InitialGapSpec::deterministic(Vec z) {
    InitialGapSpec s;
    s.kind = "deterministic";
    s.fill = [z = std::move(z)](long, Vec& out) { out = z; };
    return s;
}

InitialGapSpec InitialGapSpec::sequence(std::function<double(long i)> f, int d) {
    Vec z(d);
    for (int i = 0; i < d; ++i) z(i) = f(i + 1);
    InitialGapSpec s = deterministic(std::move(z));
    s.kind = "deterministic-sequence";
    return s;
}

InitialGapSpec InitialGapSpec::product_exp(ProductExpLaw law, std::uint64_t seed) {
    law.validate();
    InitialGapSpec s;
    s.kind = "product-exp";
    NoiseKernel kern(seed, NoiseKernel::kInitial);
    s.fill = [law = std::move(law), kern](long path, Vec& out) {
        for (int i = 0; i < out.size(); ++i)
            out(i) = kern.exponential(law.rates(i), path, i, 0);
    };
    return s;
}

InitialGapSpec InitialGapSpec::iid_scaled(std::function<double(long i)> lambda, int d,
                                          std::uint64_t seed) {
    InitialGapSpec s;
    s.kind = "iid-scaled";
    NoiseKernel kern(seed, NoiseKernel::kInitial);
    s.fill = [lambda = std::move(lambda), kern, d](long path, Vec& out) {
        for (int i = 0; i < d && i < out.size(); ++i)
            out(i) = lambda(i + 1) * kern.exponential(1.0, path, i, 0);
    };
    return s;
}

InitialGapSpec InitialGapSpec::perturbed_stationary(ProductExpLaw base, double beta_pert,
                                                    std::uint64_t seed) {
    base.validate();
    InitialGapSpec s;
    s.kind = "perturbed-stationary";
    NoiseKernel kern(seed, NoiseKernel::kInitial);
    s.fill = [base = std::move(base), beta_pert, kern](long path, Vec& out) {
        for (int i = 0; i < out.size(); ++i) {
            const double pert_rate = std::pow(i + 1.0, 1.0 + beta_pert);
            out(i) = kern.exponential(base.rates(i), path, i, 0) +
                     kern.exponential(pert_rate, path, i, 1);
        }
    };
    return s;
}

InitialGapSpec InitialGapSpec::custom(std::function<void(long, Vec&)> fn) {
    InitialGapSpec s;
    s.kind = "custom-sampler";
    s.fill = std::move(fn);
    return s;
}

double membership_partial_sum(const Vec& z, double alpha) {
    double acc = 0.0, prefix = 0.0;
    for (int j = 0; j < z.size(); ++j) {
        prefix += z(j);
        acc += std::exp(-alpha * prefix * prefix);
    }
    return acc;
}

double w1_to_exponential(std::vector<std::pair<double, double>> ws, double rate) {
    if (ws.empty()) throw std::invalid_argument("empty sample");
    if (!(rate > 0.0)) throw std::invalid_argument("rate must be positive");
    std::sort(ws.begin(), ws.end());
    double wtot = 0.0;
    for (auto& [x, w] : ws) {
        if (x < 0.0 || w < 0.0) throw std::invalid_argument("negative sample or weight");
        wtot += w;
    }
    if (wtot <= 0.0) throw std::invalid_argument("zero total weight");

    const auto H = [rate](double x) { return x + std::exp(-rate * x) / rate; };
    // integral of |c - F| over [a, b] for constant empirical level c
    const auto seg = [&](double a, double b, double c) {
        if (b <= a) return 0.0;
        auto below = [&](double lo, double hi) {  // region where F <= c
            return c * (hi - lo) - (H(hi) - H(lo));
        };
        auto above = [&](double lo, double hi) { return (H(hi) - H(lo)) - c * (hi - lo); };
        if (c >= 1.0) return below(a, b);
        const double xc = -std::log1p(-c) / rate;
        if (xc <= a) return above(a, b);
        if (xc >= b) return below(a, b);
        return below(a, xc) + above(xc, b);
    };

    double acc = 0.0, cum = 0.0, prev = 0.0;
    for (const auto& [x, w] : ws) {
        acc += seg(prev, x, cum / wtot);
        cum += w;
        prev = x;
    }
    acc += std::exp(-rate * prev) / rate;  // tail where F_hat = 1
    return acc;
}

std::vector<long> default_d_grid(long top) {
    std::vector<long> grid;
    for (long base = 100; base <= top; base *= 10)
        for (double m : {1.0, 2.5, 5.0}) {
            const long v = static_cast<long>(base * m);
            if (v <= top) grid.push_back(v);
        }
    if (grid.empty() || grid.back() != top) grid.push_back(top);
    return grid;
}

NuTEstimate run_doa_experiment(const InitialGapSpec& initial, const ProductExpLaw& target,
                               const DoaExperimentConfig& cfg) {
    if (cfg.k_watch < 1 || cfg.k_watch > cfg.d)
        throw std::invalid_argument("k_watch must lie in [1, d]");
    if (target.dim() < cfg.k_watch)
        throw std::invalid_argument("target law narrower than k_watch");
    if (cfg.m_obs < 2) throw std::invalid_argument("need at least two observation times");
    cfg.sim.validate();
    const int n = cfg.sim.n_steps();
    if (cfg.m_obs > n) throw std::invalid_argument("more observations than steps");

    // Observation grid 0 = s_0 < s_1 < ... < s_m = N, uniformly spaced.
    std::vector<int> obs_steps(cfg.m_obs + 1);
    for (int j = 0; j <= cfg.m_obs; ++j)
        obs_steps[j] = static_cast<int>(std::llround(static_cast<double>(j) * n / cfg.m_obs));

    NuTEstimate est;

    // Initial gaps per path; membership surrogate recorded alongside.
    const int npaths = cfg.sim.n_paths;
    Mat gaps0(npaths, cfg.d);
    {
        Vec z(cfg.d);
        double q25 = 0.0, q100 = 0.0;
        for (long p = 0; p < npaths; ++p) {
            initial.fill(p, z);
            if (z.minCoeff() < 0.0)
                throw std::invalid_argument("initial gap sampler produced a negative gap");
            gaps0.row(p) = z.transpose();
            q25 += membership_partial_sum(z.head(std::max(1, cfg.d / 4)), 0.25) / npaths;
            q100 += membership_partial_sum(z, 0.25) / npaths;
        }
        est.membership_q25 = q25;
        est.membership_q100 = q100;
    }

    const auto observed = dynamics::rank_gaps_observed_from(
        reflection::RankParams::standard_atlas(cfg.d), gaps0, cfg.sim, obs_steps,
        cfg.k_watch);

    // Time-averaged marginals: trapezoid weights over the prefix of the grid.
    est.t.resize(cfg.m_obs);
    est.w1 = Mat(cfg.m_obs, cfg.k_watch);
    std::vector<std::pair<double, double>> pooled;
    for (int j = 1; j <= cfg.m_obs; ++j) {
        est.t[j - 1] = obs_steps[j] * cfg.sim.dt;
        for (int c = 0; c < cfg.k_watch; ++c) {
            pooled.clear();
            pooled.reserve(static_cast<std::size_t>(npaths) * (j + 1));
            for (int s = 0; s <= j; ++s) {
                const double w = (s == 0 || s == j) ? 0.5 : 1.0;
                for (long p = 0; p < npaths; ++p)
                    pooled.emplace_back(observed[s](p, c), w);
            }
            est.w1(j - 1, c) = w1_to_exponential(pooled, target.rates(c));
        }
    }

    // Same-law sampling-noise quantile, calibrated once at unit rate with the
    // per-path sample size (conservative: within-path time averaging only adds
    // correlated draws) and scaled by 1/rate per coordinate.
    {
        const NoiseKernel kern(cfg.sim.seed, NoiseKernel::kNullCalib);
        std::vector<double> w1s(cfg.n_null);
        std::vector<std::pair<double, double>> sample(npaths);
        for (int r = 0; r < cfg.n_null; ++r) {
            for (long p = 0; p < npaths; ++p)
                sample[p] = {kern.exponential(1.0, r, p, 0), 1.0};
            w1s[r] = w1_to_exponential(sample, 1.0);
        }
        std::sort(w1s.begin(), w1s.end());
        const double q95 =
            w1s[std::min<std::size_t>(w1s.size() - 1,
                                      static_cast<std::size_t>(0.95 * w1s.size()))];
        est.null_q95.resize(cfg.k_watch);
        for (int c = 0; c < cfg.k_watch; ++c) est.null_q95(c) = q95 / target.rates(c);
    }
    return est;
}

}  // namespace rbmkit::doa
