#pragma once

#include <functional>
#include <limits>

#include "rbmkit/dynamics.hpp"

namespace rbmkit::coupling {

using dynamics::SimConfig;
using reflection::RankParams;
using reflection::RbmParams;
using skorohod::DiscretePath;

/// Weighted distances along a coupled pair. u is the weighted norm of the
/// R^{-1}-mapped difference, the quantity whose coordinates stay nonnegative
/// and nonincreasing under a synchronous coupling.
struct DistanceSeries {
    std::vector<double> t;
    Vec l1;
    Vec wl1;
    Vec u;
    Vec ubound;  // triangle bound via a zero-start companion; empty if not run
};

struct CoupledPair {
    DiscretePath a, b;  // shared grid, shared driving increments
    Mat noise;
    DistanceSeries dist;  // l1 filled in; weighted series via distance_series
};

/// Two copies driven by identical increments, each with its own per-step
/// reflection. Realization `path_idx` of the configured ensemble.
CoupledPair synchronous_pair(const RbmParams& params, const Vec& xA, const Vec& xB,
                             const SimConfig& cfg, long path_idx = 0);

/// Distance functionals of a stored pair; beta in (0,1].
DistanceSeries distance_series(const CoupledPair& pair, const RbmParams& params,
                               double beta);

/// Exactly monotone scalar pair: the gap between the two copies is updated in
/// difference form, so nonincrease holds in floating point with zero tolerance.
struct Pair1d {
    std::vector<double> t;
    Vec lo, diff;  // lower copy and the (nonnegative) gap; upper = lo + diff
};
Pair1d sync_pair_1d(double mu, double sigma, double xA0, double xB0,
                    const SimConfig& cfg, long path_idx = 0);

// ---------------------------------------------------------------------------
// Boundary-hit epochs of the larger-start copy

struct EpochRecord {
    std::vector<double> close_times;  // epoch close times within the horizon
    std::vector<double> l1_at_close;  // pair l1 distance at each close
    double l1_start = 0.0;
    double l1_horizon = 0.0;
};

/// Greedy epoch construction: an epoch closes at the first grid time by which
/// every coordinate of the larger-start copy has visited [0, eps_act] since the
/// epoch opened. Copy B must dominate copy A at the start.
EpochRecord contraction_epochs(const RbmParams& params, const Vec& xA, const Vec& xB,
                               const SimConfig& cfg, double eps_act, int max_epochs,
                               long path_idx = 0);

// ---------------------------------------------------------------------------
// Mirror coupling of ranked systems

struct MirrorResult {
    double coupling_time = std::numeric_limits<double>::infinity();
    double first_cross_time = std::numeric_limits<double>::infinity();
    DiscretePath ordered_a, ordered_b;  // filled when keep_paths
};

/// Rank-level coupling: increments of ranks 0..i_mirror of copy B are negated
/// until the sup difference of the first i_mirror+1 ordered coordinates drops
/// below the coalescence threshold (default sqrt(dt)/100); synchronous after,
/// with the watched block snapped together. i_mirror = -1 is the empty set
/// (pure synchronous coupling).
MirrorResult mirror_pair(const RankParams& rp, int i_mirror, const Vec& yA0,
                         const Vec& yB0, const SimConfig& cfg, long path_idx = 0,
                         bool keep_paths = false, double threshold = -1.0);

// ---------------------------------------------------------------------------
// Ensemble kernels (per-path outputs in path order; reductions stay with the caller)

/// Weighted-l1 distance curves of synchronously coupled pairs at the requested
/// steps; row per path. xB_init fills copy B's start for each path (copy A is
/// fixed), letting copy B start from e.g. a stationary sample.
Mat sync_wl1_curves(const RbmParams& params, const Vec& xA,
                    const std::function<void(long, Vec&)>& xB_init, const SimConfig& cfg,
                    const std::vector<int>& obs_steps, double beta);

struct MonotonicityCounts {
    long steps = 0;      // (step, coordinate) pairs examined
    long incr_viol = 0;  // increments above the floor
    long neg_viol = 0;   // mapped differences below -floor
};

/// Step-wise check that R^{-1}(X_B - X_A) stays nonnegative and nonincreasing
/// along synchronous pairs, with the discretization floor supplied by the
/// caller. Counts are summed over the whole ensemble.
MonotonicityCounts sync_rinv_monotonicity(const RbmParams& params, const Vec& xA,
                                          const Vec& xB, const SimConfig& cfg,
                                          double floor_incr, double floor_neg);

/// l1 distance of each pair at its first epoch close (horizon value if the
/// epoch never closes); one row per path: {close_time or inf, l1}.
Mat epoch_halving_ensemble(const RbmParams& params, const Vec& xA, const Vec& xB,
                           const SimConfig& cfg, double eps_act, int epoch_index);

}  // namespace rbmkit::coupling
