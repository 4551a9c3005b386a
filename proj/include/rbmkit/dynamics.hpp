#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "rbmkit/reflection.hpp"
#include "rbmkit/rng.hpp"
#include "rbmkit/skorohod.hpp"

namespace rbmkit::dynamics {

using reflection::RankParams;
using reflection::RbmParams;
using skorohod::DiscretePath;

/// Euler scheme with per-step discrete reflection is the single supported
/// scheme: O(N) per path and exact for d = 1.
enum class Scheme { kPerStepProjection };

struct SimConfig {
    double dt = 1e-3;
    double T = 1.0;
    int n_paths = 1;
    std::uint64_t seed = 0;
    int workers = 1;
    Scheme scheme = Scheme::kPerStepProjection;

    int n_steps() const;
    void validate() const;
};

/// One simulated path: constrained state, retained driving increments, and the
/// accumulated boundary local time.
struct PathOutput {
    DiscretePath state;    // (N+1) x d, values in the orthant
    Mat noise;             // N x k Brownian increments (already sqrt(dt)-scaled)
    DiscretePath loctime;  // (N+1) x d, componentwise nondecreasing from 0
};

struct TrajectoryBundle {
    std::vector<PathOutput> paths;
};

/// Worst defect of X(t) = x0 + D B(t) + mu t + R L(t) over the grid.
double identity_defect(const RbmParams& params, const Vec& x0, const PathOutput& path);

/// Single-step orthant projection: z := z + y + (I - P^T) ell with the minimal
/// ell >= 0. Reused across all simulators; carries its workspace.
class StepProjector {
public:
    explicit StepProjector(const reflection::ReflectionSpec& refl, double tol = 1e-13,
                           int max_sweeps = 200);

    /// Advances z by the driver increment y, accumulating pushing into ell_out.
    void step(Vec& z, const Vec& y, Vec& ell_out);

private:
    void apply_pt(const Vec& in, Vec& out) const;  // out = P^T in, sparsity-aware

    struct Entry {
        int row, col;
        double value;
    };
    std::vector<Entry> pt_entries_;  // nonzeros of P^T, row-major order
    double tol_;
    int max_sweeps_;
    int dim_;
    Vec w_, ell_, next_, drive_;
};

/// Constant-coefficient RBM paths with full trajectory retention. Memory is
/// n_paths * n_steps * d; use the terminal/observed kernels for large runs.
TrajectoryBundle simulate_rbm(const RbmParams& params, const Vec& x0, const SimConfig& cfg);

using DriftFn = std::function<void(const Vec& z, Vec& out)>;
using DiffusionFn = std::function<void(const Vec& z, Mat& out)>;

/// State-dependent reflected diffusion via Euler increments b(z) dt + sigma(z) dB.
/// With constant callbacks this reproduces simulate_rbm bitwise at equal seeds.
TrajectoryBundle simulate_reflected_diffusion(const DriftFn& drift, const DiffusionFn& diffusion,
                                              int noise_dim,
                                              const reflection::ReflectionSpec& refl,
                                              const Vec& x0, const SimConfig& cfg);

/// Terminal states only: n_paths x d, deterministic for any worker count.
Mat simulate_rbm_terminal(const RbmParams& params, const Vec& x0, const SimConfig& cfg);

/// States at selected step indices (must be sorted): one n_paths x d matrix per
/// observation point.
std::vector<Mat> simulate_rbm_observed(const RbmParams& params, const Vec& x0,
                                       const SimConfig& cfg,
                                       const std::vector<int>& obs_steps);

/// Scalar RBM max(x + mu dt + sigma dW, 0); tight loop for stationarity studies.
Vec rbm1d_terminal(double mu, double sigma, double x0, const SimConfig& cfg);

// ---------------------------------------------------------------------------
// Rank-based particle systems

struct RankSystemState {
    Vec positions;             // unordered particle locations, length d+1
    std::vector<int> ranking;  // ranking[r] = particle index of rank r (ties by index)
    Vec gaps;                  // gaps between consecutive ranked particles
};

struct RankTrajectory {
    DiscretePath ordered;                 // ranked positions per grid point
    std::vector<RankSystemState> states;  // full state series
    DiscretePath gaps;
};

/// Unordered particles advanced by Euler steps with rank-frozen coefficients
/// (evaluated at step start, ties broken by ascending particle index).
std::vector<RankTrajectory> simulate_rank_based(const RankParams& rp, const Vec& y0,
                                                const SimConfig& cfg);

/// First k_watch gaps at the requested step indices; n_paths x k_watch each.
std::vector<Mat> rank_gaps_observed(const RankParams& rp, const Vec& y0,
                                    const SimConfig& cfg, const std::vector<int>& obs_steps,
                                    int k_watch);

Mat rank_terminal_gaps(const RankParams& rp, const Vec& y0, const SimConfig& cfg);

/// Per-path initial gaps: row p of gaps0 seeds path p, particles starting at
/// the cumulative sums with the lowest pinned to 0.
std::vector<Mat> rank_gaps_observed_from(const RankParams& rp, const Mat& gaps0,
                                         const SimConfig& cfg,
                                         const std::vector<int>& obs_steps, int k_watch);

/// Gap process of the asymmetric Atlas model: tridiagonal covariance, drift
/// -e_1, collision split p / (1-p). p = 1/2 recovers the symmetric model.
TrajectoryBundle simulate_asym_atlas(double p, int d, const Vec& z0, const SimConfig& cfg);
Mat asym_atlas_terminal_gaps(double p, int d, const Vec& z0, const SimConfig& cfg);

/// Truncated rank-drift system: d+1 ranked particles with drift vector g,
/// unit diffusions, symmetric collisions. g = (1,0,...,0) is the Atlas model.
std::vector<RankTrajectory> simulate_truncated_g_atlas(const std::vector<double>& g,
                                                       const Vec& z0, const SimConfig& cfg);
std::vector<Mat> g_atlas_gaps_observed(const std::vector<double>& g, const Vec& z0,
                                       const SimConfig& cfg, const std::vector<int>& obs_steps,
                                       int k_watch);

/// Sum of squares of the drift prefix; finiteness is the membership condition
/// for the admissible drift class.
double drift_l2(const std::vector<double>& g);

/// Initial particle positions from a gap vector: y_(0) = 0, y_(k) = sum gaps.
Vec positions_from_gaps(const Vec& z0);

}  // namespace rbmkit::dynamics
