#include "rbmkit/dynamics.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "rbmkit/parallel.hpp"

namespace rbmkit::dynamics {

int SimConfig::n_steps() const {
    return static_cast<int>(std::llround(T / dt));
}

void SimConfig::validate() const {
    if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
    if (!(T >= dt)) throw std::invalid_argument("horizon must cover at least one step");
    if (n_paths < 1) throw std::invalid_argument("need at least one path");
    if (workers < 1) throw std::invalid_argument("workers must be >= 1");
}

double identity_defect(const RbmParams& params, const Vec& x0, const PathOutput& path) {
    const int n = path.state.steps();
    const int d = params.dim();
    Vec B = Vec::Zero(path.noise.cols());
    double worst = 0.0;
    for (int k = 0; k <= n; ++k) {
        if (k > 0) B += path.noise.row(k - 1).transpose();
        const double t = path.state.t[k];
        const Vec lhs = path.state.x.row(k).transpose();
        const Vec rhs = x0 + params.D() * B + params.mu() * t +
                        params.refl().R() * path.loctime.x.row(k).transpose();
        worst = std::max(worst, max_abs(Vec(lhs - rhs)));
        (void)d;
    }
    return worst;
}

StepProjector::StepProjector(const reflection::ReflectionSpec& refl, double tol,
                             int max_sweeps)
    : tol_(tol), max_sweeps_(max_sweeps), dim_(refl.dim()) {
    const Mat& P = refl.P();
    for (int i = 0; i < dim_; ++i)      // row of P^T
        for (int j = 0; j < dim_; ++j)  // column
            if (P(j, i) != 0.0) pt_entries_.push_back({i, j, P(j, i)});
    w_.resize(dim_);
    ell_.resize(dim_);
    next_.resize(dim_);
    drive_.resize(dim_);
}

void StepProjector::apply_pt(const Vec& in, Vec& out) const {
    out.setZero();
    for (const auto& e : pt_entries_) out(e.row) += e.value * in(e.col);
}

void StepProjector::step(Vec& z, const Vec& y, Vec& ell_out) {
    w_ = z + y;
    if (w_.minCoeff() >= 0.0) {
        z = w_;
        ell_out.setZero();
        return;
    }
    // Minimal pushing: fixed point of ell = [P^T ell - w]_+ from ell = 0.
    // Iterates increase monotonically and converge geometrically for
    // certified-transient P.
    ell_ = (-w_).cwiseMax(0.0);
    int sweep = 0;
    for (; sweep < max_sweeps_; ++sweep) {
        apply_pt(ell_, drive_);
        next_ = (drive_ - w_).cwiseMax(0.0);
        const double delta = (next_ - ell_).cwiseAbs().maxCoeff();
        ell_.swap(next_);
        if (delta < tol_) break;
    }
    if (sweep >= max_sweeps_)
        throw std::runtime_error("per-step projection did not converge");
    apply_pt(ell_, drive_);
    z = w_ + ell_ - drive_;
    z = z.cwiseMax(0.0);  // scrub FP residue at active coordinates
    ell_out = ell_;
}

TrajectoryBundle simulate_reflected_diffusion(const DriftFn& drift,
                                              const DiffusionFn& diffusion, int noise_dim,
                                              const reflection::ReflectionSpec& refl,
                                              const Vec& x0, const SimConfig& cfg) {
    cfg.validate();
    const int d = refl.dim();
    if (x0.size() != d || x0.minCoeff() < 0.0)
        throw std::invalid_argument("start must lie in the nonnegative orthant");
    const int n = cfg.n_steps();
    const double sqdt = std::sqrt(cfg.dt);
    const NoiseKernel noise(cfg.seed, NoiseKernel::kDynamics);

    TrajectoryBundle bundle;
    bundle.paths.resize(cfg.n_paths);
    parallel_for(cfg.n_paths, cfg.workers, [&](long p) {
        PathOutput out;
        out.state = DiscretePath::uniform(n, cfg.dt, d);
        out.loctime = DiscretePath::uniform(n, cfg.dt, d);
        out.noise = Mat(n, noise_dim);
        StepProjector proj(refl);
        Vec z = x0, bvec(d), y(d), ell(d), dB(noise_dim);
        Mat Dmat(d, noise_dim);
        std::vector<double> xi(noise_dim);
        Vec L = Vec::Zero(d);
        out.state.x.row(0) = z.transpose();
        for (int k = 0; k < n; ++k) {
            noise.fill_gaussian(p, k, xi.data(), noise_dim);
            for (int j = 0; j < noise_dim; ++j) dB(j) = sqdt * xi[j];
            out.noise.row(k) = dB.transpose();
            drift(z, bvec);
            diffusion(z, Dmat);
            if (!bvec.allFinite() || !Dmat.allFinite())
                throw std::runtime_error(
                    fmt::format("coefficient callback returned nonfinite values at "
                                "path {} step {}",
                                p, k));
            y = bvec * cfg.dt + Dmat * dB;
            proj.step(z, y, ell);
            if (!z.allFinite())
                throw std::runtime_error(
                    fmt::format("state blew up at path {} step {}", p, k));
            L += ell;
            out.state.x.row(k + 1) = z.transpose();
            out.loctime.x.row(k + 1) = L.transpose();
        }
        bundle.paths[p] = std::move(out);
    });
    return bundle;
}

TrajectoryBundle simulate_rbm(const RbmParams& params, const Vec& x0, const SimConfig& cfg) {
    const Vec mu = params.mu();
    const Mat D = params.D();
    return simulate_reflected_diffusion(
        [&mu](const Vec&, Vec& out) { out = mu; },
        [&D](const Vec&, Mat& out) { out = D; }, static_cast<int>(D.cols()),
        params.refl(), x0, cfg);
}

std::vector<Mat> simulate_rbm_observed(const RbmParams& params, const Vec& x0,
                                       const SimConfig& cfg,
                                       const std::vector<int>& obs_steps) {
    cfg.validate();
    const int d = params.dim();
    if (x0.size() != d || x0.minCoeff() < 0.0)
        throw std::invalid_argument("start must lie in the nonnegative orthant");
    const int n = cfg.n_steps();
    for (std::size_t i = 0; i < obs_steps.size(); ++i)
        if (obs_steps[i] < 0 || obs_steps[i] > n ||
            (i > 0 && obs_steps[i] <= obs_steps[i - 1]))
            throw std::invalid_argument("observation steps must be sorted within [0, N]");

    const double sqdt = std::sqrt(cfg.dt);
    const NoiseKernel noise(cfg.seed, NoiseKernel::kDynamics);
    const Vec mu_dt = params.mu() * cfg.dt;
    const Mat& D = params.D();
    const int kn = static_cast<int>(D.cols());

    std::vector<Mat> out(obs_steps.size(), Mat(cfg.n_paths, d));
    parallel_for(cfg.n_paths, cfg.workers, [&](long p) {
        StepProjector proj(params.refl());
        Vec z = x0, y(d), ell(d), dB(kn);
        std::vector<double> xi(kn);
        std::size_t next_obs = 0;
        for (int k = 0; k <= n; ++k) {
            while (next_obs < obs_steps.size() && obs_steps[next_obs] == k)
                out[next_obs++].row(p) = z.transpose();
            if (k == n) break;
            noise.fill_gaussian(p, k, xi.data(), kn);
            for (int j = 0; j < kn; ++j) dB(j) = sqdt * xi[j];
            y = mu_dt + D * dB;
            proj.step(z, y, ell);
            if (!z.allFinite())
                throw std::runtime_error(
                    fmt::format("state blew up at path {} step {}", p, k));
        }
    });
    return out;
}

Mat simulate_rbm_terminal(const RbmParams& params, const Vec& x0, const SimConfig& cfg) {
    return simulate_rbm_observed(params, x0, cfg, {cfg.n_steps()}).front();
}

Vec rbm1d_terminal(double mu, double sigma, double x0, const SimConfig& cfg) {
    cfg.validate();
    if (x0 < 0.0) throw std::invalid_argument("start must be nonnegative");
    const int n = cfg.n_steps();
    const double drift = mu * cfg.dt;
    const double vol = sigma * std::sqrt(cfg.dt);
    const double two_s2dt = 2.0 * sigma * sigma * cfg.dt;
    const NoiseKernel noise(cfg.seed, NoiseKernel::kDynamics);
    Vec out(cfg.n_paths);
    parallel_for(cfg.n_paths, cfg.workers, [&](long p) {
        double z = x0;
        for (int k = 0; k < n; ++k) {
            // Exact grid skeleton: sample the within-step minimum of the free
            // path from the Brownian bridge and push by its negative part.
            // Plain end-point projection leaves an O(sqrt(dt)) atom at zero;
            // this scheme has no discretization bias in law at the grid points.
            const auto u = noise.uniform_pair(p, k, 0);
            const double xi =
                std::sqrt(-2.0 * std::log(u[0])) *
                std::cos(6.283185307179586476925286766559 * u[1]);
            const double y = z + drift + vol * xi;
            const double ubr = noise.uniform(p, k, 1);
            const double gap = z - y;
            const double bridge_min =
                0.5 * (z + y - std::sqrt(gap * gap - two_s2dt * std::log(ubr)));
            z = y - std::min(0.0, bridge_min);
        }
        out(p) = z;
    });
    return out;
}

Vec positions_from_gaps(const Vec& z0) {
    Vec y(z0.size() + 1);
    y(0) = 0.0;
    for (int i = 0; i < z0.size(); ++i) y(i + 1) = y(i) + z0(i);
    return y;
}

namespace {

// Advances one rank-based path over [0, N] steps, invoking visit(k) with the
// current ranking after k steps. Coefficients are frozen at step start; the
// ranking is repaired by insertion sort (nearly sorted between steps).
template <class Visit>
void rank_path(const RankParams& rp, const Vec& y0, const SimConfig& cfg,
               const NoiseKernel& noise, long path, Visit&& visit) {
    const int m = rp.d + 1;
    const int n = cfg.n_steps();
    const double sqdt = std::sqrt(cfg.dt);
    std::vector<double> pos(m), xi(m);
    std::vector<int> rank_to_particle(m);
    for (int i = 0; i < m; ++i) {
        pos[i] = y0(i);
        rank_to_particle[i] = i;
    }
    auto before = [&pos](int a, int b) {
        return pos[a] < pos[b] || (pos[a] == pos[b] && a < b);
    };
    for (int k = 0;; ++k) {
        // repair ordering (ties resolved by ascending particle index)
        for (int r = 1; r < m; ++r) {
            const int moving = rank_to_particle[r];
            int s = r;
            while (s > 0 && before(moving, rank_to_particle[s - 1])) {
                rank_to_particle[s] = rank_to_particle[s - 1];
                --s;
            }
            rank_to_particle[s] = moving;
        }
        visit(k, pos, rank_to_particle);
        if (k == n) break;
        noise.fill_gaussian(path, k, xi.data(), m);
        for (int r = 0; r < m; ++r) {
            const int i = rank_to_particle[r];
            pos[i] += rp.delta[r] * cfg.dt + rp.sigma_ranks[r] * sqdt * xi[i];
        }
    }
}

}  // namespace

std::vector<RankTrajectory> simulate_rank_based(const RankParams& rp, const Vec& y0,
                                                const SimConfig& cfg) {
    rp.validate();
    cfg.validate();
    const int m = rp.d + 1;
    if (y0.size() != m) throw std::invalid_argument("start vector must have length d+1");
    for (int i = 1; i < m; ++i)
        if (y0(i) < y0(i - 1)) throw std::invalid_argument("start must be nondecreasing");
    const int n = cfg.n_steps();
    const NoiseKernel noise(cfg.seed, NoiseKernel::kDynamics);

    std::vector<RankTrajectory> out(cfg.n_paths);
    parallel_for(cfg.n_paths, cfg.workers, [&](long p) {
        RankTrajectory traj;
        traj.ordered = DiscretePath::uniform(n, cfg.dt, m);
        traj.gaps = DiscretePath::uniform(n, cfg.dt, rp.d);
        traj.states.resize(n + 1);
        rank_path(rp, y0, cfg, noise, p,
                  [&](int k, const std::vector<double>& pos, const std::vector<int>& r2p) {
                      RankSystemState st;
                      st.positions = Eigen::Map<const Vec>(pos.data(), m);
                      st.ranking = r2p;
                      st.gaps.resize(rp.d);
                      for (int g = 1; g < m; ++g) {
                          const double gap = pos[r2p[g]] - pos[r2p[g - 1]];
                          st.gaps(g - 1) = gap;
                          traj.gaps.x(k, g - 1) = gap;
                          traj.ordered.x(k, g) = pos[r2p[g]];
                      }
                      traj.ordered.x(k, 0) = pos[r2p[0]];
                      traj.states[k] = std::move(st);
                  });
        out[p] = std::move(traj);
    });
    return out;
}

std::vector<Mat> rank_gaps_observed(const RankParams& rp, const Vec& y0,
                                    const SimConfig& cfg, const std::vector<int>& obs_steps,
                                    int k_watch) {
    rp.validate();
    cfg.validate();
    const int m = rp.d + 1;
    if (y0.size() != m) throw std::invalid_argument("start vector must have length d+1");
    for (int i = 1; i < m; ++i)
        if (y0(i) < y0(i - 1)) throw std::invalid_argument("start must be nondecreasing");
    if (k_watch < 1 || k_watch > rp.d) throw std::invalid_argument("bad k_watch");
    const int n = cfg.n_steps();
    for (std::size_t i = 0; i < obs_steps.size(); ++i)
        if (obs_steps[i] < 0 || obs_steps[i] > n ||
            (i > 0 && obs_steps[i] <= obs_steps[i - 1]))
            throw std::invalid_argument("observation steps must be sorted within [0, N]");
    const NoiseKernel noise(cfg.seed, NoiseKernel::kDynamics);

    std::vector<Mat> out(obs_steps.size(), Mat(cfg.n_paths, k_watch));
    parallel_for(cfg.n_paths, cfg.workers, [&](long p) {
        std::size_t next_obs = 0;
        rank_path(rp, y0, cfg, noise, p,
                  [&](int k, const std::vector<double>& pos, const std::vector<int>& r2p) {
                      while (next_obs < obs_steps.size() && obs_steps[next_obs] == k) {
                          for (int g = 1; g <= k_watch; ++g)
                              out[next_obs](p, g - 1) = pos[r2p[g]] - pos[r2p[g - 1]];
                          ++next_obs;
                      }
                  });
    });
    return out;
}

Mat rank_terminal_gaps(const RankParams& rp, const Vec& y0, const SimConfig& cfg) {
    return rank_gaps_observed(rp, y0, cfg, {cfg.n_steps()}, rp.d).front();
}

std::vector<Mat> rank_gaps_observed_from(const RankParams& rp, const Mat& gaps0,
                                         const SimConfig& cfg,
                                         const std::vector<int>& obs_steps, int k_watch) {
    rp.validate();
    cfg.validate();
    if (gaps0.rows() != cfg.n_paths || gaps0.cols() != rp.d)
        throw std::invalid_argument("initial gap matrix must be n_paths x d");
    if (gaps0.minCoeff() < 0.0) throw std::invalid_argument("initial gaps must be >= 0");
    if (k_watch < 1 || k_watch > rp.d) throw std::invalid_argument("bad k_watch");
    const int n = cfg.n_steps();
    for (std::size_t i = 0; i < obs_steps.size(); ++i)
        if (obs_steps[i] < 0 || obs_steps[i] > n ||
            (i > 0 && obs_steps[i] <= obs_steps[i - 1]))
            throw std::invalid_argument("observation steps must be sorted within [0, N]");
    const NoiseKernel noise(cfg.seed, NoiseKernel::kDynamics);
    const int m = rp.d + 1;

    std::vector<Mat> out(obs_steps.size(), Mat(cfg.n_paths, k_watch));
    parallel_for(cfg.n_paths, cfg.workers, [&](long p) {
        const Vec y0 = positions_from_gaps(gaps0.row(p).transpose());
        std::size_t next_obs = 0;
        rank_path(rp, y0, cfg, noise, p,
                  [&](int k, const std::vector<double>& pos, const std::vector<int>& r2p) {
                      while (next_obs < obs_steps.size() && obs_steps[next_obs] == k) {
                          for (int g = 1; g <= k_watch; ++g)
                              out[next_obs](p, g - 1) = pos[r2p[g]] - pos[r2p[g - 1]];
                          ++next_obs;
                      }
                  });
        (void)m;
    });
    return out;
}

TrajectoryBundle simulate_asym_atlas(double p, int d, const Vec& z0, const SimConfig& cfg) {
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("collision p must be in (0,1)");
    RankParams rp = RankParams::standard_atlas(d);
    rp.collision_p = p;
    return simulate_rbm(rp.gap_rbm(), z0, cfg);
}

Mat asym_atlas_terminal_gaps(double p, int d, const Vec& z0, const SimConfig& cfg) {
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("collision p must be in (0,1)");
    RankParams rp = RankParams::standard_atlas(d);
    rp.collision_p = p;
    return simulate_rbm_terminal(rp.gap_rbm(), z0, cfg);
}

double drift_l2(const std::vector<double>& g) {
    double acc = 0.0;
    for (double x : g) acc += x * x;
    return acc;
}

std::vector<RankTrajectory> simulate_truncated_g_atlas(const std::vector<double>& g,
                                                       const Vec& z0, const SimConfig& cfg) {
    const int d = static_cast<int>(z0.size());
    if (static_cast<int>(g.size()) < d + 1)
        throw std::invalid_argument("rank drift vector shorter than d+1");
    if (!std::isfinite(drift_l2(g)))
        throw std::invalid_argument("drift prefix has infinite energy");
    return simulate_rank_based(RankParams::g_atlas(g, d), positions_from_gaps(z0), cfg);
}

std::vector<Mat> g_atlas_gaps_observed(const std::vector<double>& g, const Vec& z0,
                                       const SimConfig& cfg, const std::vector<int>& obs_steps,
                                       int k_watch) {
    const int d = static_cast<int>(z0.size());
    if (static_cast<int>(g.size()) < d + 1)
        throw std::invalid_argument("rank drift vector shorter than d+1");
    return rank_gaps_observed(RankParams::g_atlas(g, d), positions_from_gaps(z0), cfg,
                              obs_steps, k_watch);
}

}  // namespace rbmkit::dynamics
