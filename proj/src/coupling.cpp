#include "rbmkit/coupling.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "rbmkit/parallel.hpp"

namespace rbmkit::coupling {

using dynamics::StepProjector;

namespace {

void check_start(const RbmParams& params, const Vec& x, const char* which) {
    if (x.size() != params.dim() || x.minCoeff() < 0.0)
        throw std::invalid_argument(fmt::format("invalid start vector {}", which));
}

double weighted_l1(const Vec& v, double beta) {
    double acc = 0.0, w = 1.0;
    for (int i = 0; i < v.size(); ++i) {
        w *= beta;
        acc += w * std::abs(v(i));
    }
    return acc;
}

}  // namespace

CoupledPair synchronous_pair(const RbmParams& params, const Vec& xA, const Vec& xB,
                             const SimConfig& cfg, long path_idx) {
    cfg.validate();
    check_start(params, xA, "xA");
    check_start(params, xB, "xB");
    const int d = params.dim();
    const int n = cfg.n_steps();
    const int kn = static_cast<int>(params.D().cols());
    const double sqdt = std::sqrt(cfg.dt);
    const NoiseKernel noise(cfg.seed, NoiseKernel::kDynamics);

    CoupledPair pair;
    pair.a = DiscretePath::uniform(n, cfg.dt, d);
    pair.b = DiscretePath::uniform(n, cfg.dt, d);
    pair.noise = Mat(n, kn);
    pair.dist.t = pair.a.t;
    pair.dist.l1.resize(n + 1);

    StepProjector projA(params.refl()), projB(params.refl());
    Vec za = xA, zb = xB, y(d), ell(d), dB(kn);
    std::vector<double> xi(kn);
    pair.a.x.row(0) = za.transpose();
    pair.b.x.row(0) = zb.transpose();
    pair.dist.l1(0) = l1_norm(Vec(za - zb));
    for (int k = 0; k < n; ++k) {
        noise.fill_gaussian(path_idx, k, xi.data(), kn);
        for (int j = 0; j < kn; ++j) dB(j) = sqdt * xi[j];
        pair.noise.row(k) = dB.transpose();
        y = params.mu() * cfg.dt + params.D() * dB;
        projA.step(za, y, ell);
        projB.step(zb, y, ell);
        pair.a.x.row(k + 1) = za.transpose();
        pair.b.x.row(k + 1) = zb.transpose();
        pair.dist.l1(k + 1) = l1_norm(Vec(za - zb));
    }
    return pair;
}

DistanceSeries distance_series(const CoupledPair& pair, const RbmParams& params,
                               double beta) {
    if (!(beta > 0.0 && beta <= 1.0))
        throw std::invalid_argument("beta must lie in (0, 1]");
    const int n = static_cast<int>(pair.a.t.size());
    DistanceSeries out;
    out.t = pair.a.t;
    out.l1.resize(n);
    out.wl1.resize(n);
    out.u.resize(n);
    const Mat& Rinv = params.refl().Rinv();
    for (int k = 0; k < n; ++k) {
        const Vec diff = (pair.a.x.row(k) - pair.b.x.row(k)).transpose();
        out.l1(k) = l1_norm(diff);
        out.wl1(k) = weighted_l1(diff, beta);
        out.u(k) = weighted_l1(Vec(Rinv * diff), beta);
    }
    return out;
}

Pair1d sync_pair_1d(double mu, double sigma, double xA0, double xB0, const SimConfig& cfg,
                    long path_idx) {
    cfg.validate();
    if (xA0 < 0.0 || xB0 < 0.0) throw std::invalid_argument("starts must be nonnegative");
    const int n = cfg.n_steps();
    const double drift = mu * cfg.dt;
    const double vol = sigma * std::sqrt(cfg.dt);
    const NoiseKernel noise(cfg.seed, NoiseKernel::kDynamics);

    Pair1d out;
    out.t.resize(n + 1);
    out.lo.resize(n + 1);
    out.diff.resize(n + 1);
    double lo = std::min(xA0, xB0);
    double diff = std::abs(xA0 - xB0);
    out.t[0] = 0.0;
    out.lo(0) = lo;
    out.diff(0) = diff;
    for (int k = 0; k < n; ++k) {
        const auto g = noise.gaussian_pair(path_idx, k, 0);
        const double u = lo + drift + vol * g[0];
        lo = std::max(u, 0.0);
        // Difference-form update: each branch is exactly <= the previous diff
        // in floating point (rounding is monotone), so the series never rises.
        if (u >= 0.0) {
            // both copies interior or lower exactly at the boundary: gap carried
        } else if (u + diff <= 0.0) {
            diff = 0.0;
        } else {
            diff = u + diff;
        }
        out.t[k + 1] = (k + 1) * cfg.dt;
        out.lo(k + 1) = lo;
        out.diff(k + 1) = diff;
    }
    return out;
}

namespace {

// Shared scaffolding for epoch bookkeeping along one synchronous pair.
template <class OnClose>
void run_epochs(const RbmParams& params, const Vec& xA, const Vec& xB,
                const SimConfig& cfg, double eps_act, int max_epochs, long path_idx,
                OnClose&& on_close, double* l1_horizon) {
    const int d = params.dim();
    const int n = cfg.n_steps();
    const int kn = static_cast<int>(params.D().cols());
    const double sqdt = std::sqrt(cfg.dt);
    const NoiseKernel noise(cfg.seed, NoiseKernel::kDynamics);
    StepProjector projA(params.refl()), projB(params.refl());
    Vec za = xA, zb = xB, y(d), ell(d), dB(kn);
    std::vector<double> xi(kn);
    std::vector<char> touched(d, 0);
    int n_touched = 0;
    int closed = 0;
    for (int k = 0; k < n && closed < max_epochs; ++k) {
        noise.fill_gaussian(path_idx, k, xi.data(), kn);
        for (int j = 0; j < kn; ++j) dB(j) = sqdt * xi[j];
        y = params.mu() * cfg.dt + params.D() * dB;
        projA.step(za, y, ell);
        projB.step(zb, y, ell);
        for (int i = 0; i < d; ++i)
            if (!touched[i] && zb(i) <= eps_act) {
                touched[i] = 1;
                ++n_touched;
            }
        if (n_touched == d) {
            ++closed;
            on_close(closed, (k + 1) * cfg.dt, l1_norm(Vec(za - zb)));
            std::fill(touched.begin(), touched.end(), 0);
            n_touched = 0;
        }
    }
    if (l1_horizon) *l1_horizon = l1_norm(Vec(za - zb));
}

}  // namespace

EpochRecord contraction_epochs(const RbmParams& params, const Vec& xA, const Vec& xB,
                               const SimConfig& cfg, double eps_act, int max_epochs,
                               long path_idx) {
    cfg.validate();
    check_start(params, xA, "xA");
    check_start(params, xB, "xB");
    if ((xB - xA).minCoeff() < 0.0)
        throw std::invalid_argument("epoch bookkeeping expects xB >= xA componentwise");
    EpochRecord rec;
    rec.l1_start = l1_norm(Vec(xB - xA));
    run_epochs(
        params, xA, xB, cfg, eps_act, max_epochs, path_idx,
        [&](int, double t, double l1) {
            rec.close_times.push_back(t);
            rec.l1_at_close.push_back(l1);
        },
        &rec.l1_horizon);
    return rec;
}

MirrorResult mirror_pair(const RankParams& rp, int i_mirror, const Vec& yA0,
                         const Vec& yB0, const SimConfig& cfg, long path_idx,
                         bool keep_paths, double threshold) {
    rp.validate();
    cfg.validate();
    const int m = rp.d + 1;
    if (i_mirror < -1 || i_mirror > rp.d)
        throw std::invalid_argument("mirror index out of range");
    if (yA0.size() != m || yB0.size() != m)
        throw std::invalid_argument("start vectors must have length d+1");
    for (int i = 1; i < m; ++i)
        if (yA0(i) < yA0(i - 1) || yB0(i) < yB0(i - 1))
            throw std::invalid_argument("starts must be sorted");
    const int n = cfg.n_steps();
    const double sqdt = std::sqrt(cfg.dt);
    if (threshold <= 0.0) threshold = 1e-2 * sqdt;
    const NoiseKernel noise(cfg.seed, NoiseKernel::kDynamics);

    MirrorResult res;
    if (keep_paths) {
        res.ordered_a = DiscretePath::uniform(n, cfg.dt, m);
        res.ordered_b = DiscretePath::uniform(n, cfg.dt, m);
    }
    Vec ya = yA0, yb = yB0;
    std::vector<double> xi(m);
    bool mirrored = i_mirror >= 0;
    auto watched_gap = [&](int k) {
        double g = 0.0;
        for (int r = 0; r <= i_mirror; ++r) g = std::max(g, std::abs(ya(r) - yb(r)));
        (void)k;
        return g;
    };
    if (!mirrored || watched_gap(0) <= threshold) {
        res.coupling_time = 0.0;
        mirrored = false;
        for (int r = 0; r <= i_mirror; ++r) yb(r) = ya(r);
    }
    if (keep_paths) {
        res.ordered_a.x.row(0) = ya.transpose();
        res.ordered_b.x.row(0) = yb.transpose();
    }
    for (int k = 0; k < n; ++k) {
        noise.fill_gaussian(path_idx, k, xi.data(), m);
        bool crossed = false;
        for (int r = 0; r < m; ++r) {
            const double dw = rp.sigma_ranks[r] * sqdt * xi[r];
            ya(r) += rp.delta[r] * cfg.dt + dw;
            // only the driving motions are mirrored; the rank drift is shared
            yb(r) += rp.delta[r] * cfg.dt + ((mirrored && r <= i_mirror) ? -dw : dw);
        }
        for (int r = 1; r < m; ++r)
            if (ya(r) < ya(r - 1) || yb(r) < yb(r - 1)) crossed = true;
        std::sort(ya.data(), ya.data() + m);
        std::sort(yb.data(), yb.data() + m);
        const double t = (k + 1) * cfg.dt;
        if (crossed && !std::isfinite(res.first_cross_time)) res.first_cross_time = t;
        if (mirrored && watched_gap(k) <= threshold) {
            res.coupling_time = t;
            mirrored = false;
            for (int r = 0; r <= i_mirror; ++r) yb(r) = ya(r);
            std::sort(yb.data(), yb.data() + m);
        }
        if (keep_paths) {
            res.ordered_a.x.row(k + 1) = ya.transpose();
            res.ordered_b.x.row(k + 1) = yb.transpose();
        }
    }
    return res;
}

Mat sync_wl1_curves(const RbmParams& params, const Vec& xA,
                    const std::function<void(long, Vec&)>& xB_init, const SimConfig& cfg,
                    const std::vector<int>& obs_steps, double beta) {
    cfg.validate();
    check_start(params, xA, "xA");
    if (!(beta > 0.0 && beta <= 1.0))
        throw std::invalid_argument("beta must lie in (0, 1]");
    const int d = params.dim();
    const int n = cfg.n_steps();
    const int kn = static_cast<int>(params.D().cols());
    for (std::size_t i = 0; i < obs_steps.size(); ++i)
        if (obs_steps[i] < 0 || obs_steps[i] > n ||
            (i > 0 && obs_steps[i] <= obs_steps[i - 1]))
            throw std::invalid_argument("observation steps must be sorted within [0, N]");
    const double sqdt = std::sqrt(cfg.dt);
    const NoiseKernel noise(cfg.seed, NoiseKernel::kDynamics);

    Mat out(cfg.n_paths, obs_steps.size());
    parallel_for(cfg.n_paths, cfg.workers, [&](long p) {
        StepProjector projA(params.refl()), projB(params.refl());
        Vec za = xA, zb(d), y(d), ell(d), dB(kn);
        std::vector<double> xi(kn);
        xB_init(p, zb);
        if (zb.minCoeff() < 0.0)
            throw std::runtime_error("xB initializer produced a negative gap");
        std::size_t next_obs = 0;
        for (int k = 0; k <= n; ++k) {
            while (next_obs < obs_steps.size() && obs_steps[next_obs] == k)
                out(p, next_obs++) = weighted_l1(Vec(za - zb), beta);
            if (k == n) break;
            noise.fill_gaussian(p, k, xi.data(), kn);
            for (int j = 0; j < kn; ++j) dB(j) = sqdt * xi[j];
            y = params.mu() * cfg.dt + params.D() * dB;
            projA.step(za, y, ell);
            projB.step(zb, y, ell);
        }
    });
    return out;
}

MonotonicityCounts sync_rinv_monotonicity(const RbmParams& params, const Vec& xA,
                                          const Vec& xB, const SimConfig& cfg,
                                          double floor_incr, double floor_neg) {
    cfg.validate();
    check_start(params, xA, "xA");
    check_start(params, xB, "xB");
    const int d = params.dim();
    const int n = cfg.n_steps();
    const int kn = static_cast<int>(params.D().cols());
    const double sqdt = std::sqrt(cfg.dt);
    const NoiseKernel noise(cfg.seed, NoiseKernel::kDynamics);
    const Mat& Rinv = params.refl().Rinv();

    std::vector<MonotonicityCounts> per_path(cfg.n_paths);
    parallel_for(cfg.n_paths, cfg.workers, [&](long p) {
        StepProjector projA(params.refl()), projB(params.refl());
        Vec za = xA, zb = xB, y(d), ell(d), dB(kn);
        std::vector<double> xi(kn);
        Vec v = Rinv * (zb - za);
        MonotonicityCounts c;
        for (int k = 0; k < n; ++k) {
            noise.fill_gaussian(p, k, xi.data(), kn);
            for (int j = 0; j < kn; ++j) dB(j) = sqdt * xi[j];
            y = params.mu() * cfg.dt + params.D() * dB;
            projA.step(za, y, ell);
            projB.step(zb, y, ell);
            const Vec vn = Rinv * (zb - za);
            for (int i = 0; i < d; ++i) {
                ++c.steps;
                if (vn(i) - v(i) > floor_incr) ++c.incr_viol;
                if (vn(i) < -floor_neg) ++c.neg_viol;
            }
            v = vn;
        }
        per_path[p] = c;
    });
    MonotonicityCounts total;
    for (const auto& c : per_path) {
        total.steps += c.steps;
        total.incr_viol += c.incr_viol;
        total.neg_viol += c.neg_viol;
    }
    return total;
}

Mat epoch_halving_ensemble(const RbmParams& params, const Vec& xA, const Vec& xB,
                           const SimConfig& cfg, double eps_act, int epoch_index) {
    cfg.validate();
    if (epoch_index < 1) throw std::invalid_argument("epoch index must be >= 1");
    Mat out(cfg.n_paths, 2);
    parallel_for(cfg.n_paths, cfg.workers, [&](long p) {
        double horizon_l1 = 0.0;
        double close_t = std::numeric_limits<double>::infinity();
        double close_l1 = std::numeric_limits<double>::quiet_NaN();
        SimConfig local = cfg;
        local.workers = 1;
        run_epochs(
            params, xA, xB, local, eps_act, epoch_index, p,
            [&](int idx, double t, double l1) {
                if (idx == epoch_index) {
                    close_t = t;
                    close_l1 = l1;
                }
            },
            &horizon_l1);
        out(p, 0) = close_t;
        out(p, 1) = std::isfinite(close_t) ? close_l1 : horizon_l1;
    });
    return out;
}

}  // namespace rbmkit::coupling
