#include "rbmkit/skorohod.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ostream.h>

namespace rbmkit::skorohod {

void DiscretePath::validate() const {
    if (t.empty() || static_cast<int>(t.size()) != x.rows())
        throw std::invalid_argument("grid/sample length mismatch");
    for (std::size_t k = 1; k < t.size(); ++k)
        if (!(t[k] > t[k - 1]))
            throw std::invalid_argument("time grid must be strictly increasing");
    if (!x.allFinite()) throw std::invalid_argument("path has nonfinite values");
}

DiscretePath DiscretePath::uniform(int n_steps, double dt, int d) {
    DiscretePath p;
    p.t.resize(n_steps + 1);
    for (int k = 0; k <= n_steps; ++k) p.t[k] = k * dt;
    p.x = Mat::Zero(n_steps + 1, d);
    return p;
}

void write_csv(const DiscretePath& path, std::ostream& os) {
    os << "t";
    for (int j = 1; j <= path.dim(); ++j) fmt::print(os, ",x{}", j);
    os << "\n";
    for (int k = 0; k < static_cast<int>(path.t.size()); ++k) {
        fmt::print(os, "{}", path.t[k]);
        for (int j = 0; j < path.dim(); ++j) fmt::print(os, ",{}", path.x(k, j));
        os << "\n";
    }
}

DiscretePath read_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("empty path file");
    int d = -1;
    {
        std::stringstream hs(line);
        std::string tok;
        int cols = 0;
        while (std::getline(hs, tok, ',')) ++cols;
        d = cols - 1;
    }
    if (d < 1) throw std::runtime_error("path header must be t,x1,...,xd");
    std::vector<double> ts;
    std::vector<double> vals;
    int lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::stringstream ls(line);
        std::string tok;
        int col = 0;
        while (std::getline(ls, tok, ',')) {
            char* end = nullptr;
            const double v = std::strtod(tok.c_str(), &end);
            if (end == tok.c_str())
                throw std::runtime_error(fmt::format("bad number at line {}", lineno));
            if (col == 0)
                ts.push_back(v);
            else
                vals.push_back(v);
            ++col;
        }
        if (col != d + 1)
            throw std::runtime_error(fmt::format("wrong column count at line {}", lineno));
    }
    DiscretePath p;
    p.t = std::move(ts);
    p.x = Mat(p.t.size(), d);
    for (std::size_t k = 0; k < p.t.size(); ++k)
        for (int j = 0; j < d; ++j) p.x(k, j) = vals[k * d + j];
    p.validate();
    return p;
}

namespace {
constexpr char kMagic[8] = {'R', 'B', 'M', 'P', 'A', 'T', 'H', '1'};
}

void write_binary(const DiscretePath& path, std::ostream& os) {
    os.write(kMagic, sizeof(kMagic));
    const std::uint64_t n = path.t.size(), d = path.dim();
    os.write(reinterpret_cast<const char*>(&n), 8);
    os.write(reinterpret_cast<const char*>(&d), 8);
    os.write(reinterpret_cast<const char*>(path.t.data()), 8 * n);
    for (std::uint64_t k = 0; k < n; ++k)
        for (std::uint64_t j = 0; j < d; ++j) {
            const double v = path.x(k, j);
            os.write(reinterpret_cast<const char*>(&v), 8);
        }
}

DiscretePath read_binary(std::istream& is) {
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kMagic, 8) != 0)
        throw std::runtime_error("not a path binary");
    std::uint64_t n = 0, d = 0;
    is.read(reinterpret_cast<char*>(&n), 8);
    is.read(reinterpret_cast<char*>(&d), 8);
    DiscretePath p;
    p.t.resize(n);
    is.read(reinterpret_cast<char*>(p.t.data()), 8 * n);
    p.x = Mat(n, d);
    for (std::uint64_t k = 0; k < n; ++k)
        for (std::uint64_t j = 0; j < d; ++j) {
            double v;
            is.read(reinterpret_cast<char*>(&v), 8);
            p.x(k, j) = v;
        }
    if (!is) throw std::runtime_error("truncated path binary");
    return p;
}

double activity_threshold(double dt, double sigma_max) {
    return 1e-3 * sigma_max * std::sqrt(dt);
}

double complementarity_residual(const SkorohodSolution& sol, double eps_act) {
    // A pushing increment over (t_k, t_{k+1}] leaves the state at the boundary
    // at t_{k+1}, so the defect pairs each increment with the right endpoint.
    const int d = sol.phi.dim();
    const int n = static_cast<int>(sol.phi.t.size());
    double worst = 0.0;
    for (int i = 0; i < d; ++i) {
        double acc = 0.0;
        for (int k = 0; k + 1 < n; ++k)
            if (sol.phi.x(k + 1, i) > eps_act)
                acc += sol.ell.x(k + 1, i) - sol.ell.x(k, i);
        worst = std::max(worst, acc);
    }
    return worst;
}

SkorohodSolution sm_1d(const DiscretePath& psi, double x0) {
    psi.validate();
    if (psi.dim() != 1) throw std::invalid_argument("sm_1d requires a scalar path");
    if (x0 < 0.0) throw std::invalid_argument("start must be nonnegative");
    const int n = static_cast<int>(psi.t.size());
    SkorohodSolution sol;
    sol.phi.t = psi.t;
    sol.ell.t = psi.t;
    sol.phi.x = Mat(n, 1);
    sol.ell.x = Mat(n, 1);
    double runmin = 0.0;
    for (int k = 0; k < n; ++k) {
        const double free_pt = x0 + psi.x(k, 0);
        runmin = std::min(runmin, free_pt);
        const double push = -std::min(0.0, runmin);
        sol.phi.x(k, 0) = free_pt + push;
        sol.ell.x(k, 0) = push;
    }
    sol.residual = 0.0;
    return sol;
}

SkorohodSolution sm_hr(const DiscretePath& psi, const ReflectionSpec& refl,
                       const Vec& x0, const FixedPointOptions& opts) {
    psi.validate();
    const int d = refl.dim();
    if (psi.dim() != d) throw std::invalid_argument("driver/reflection dimension mismatch");
    if (x0.size() != d || x0.minCoeff() < 0.0)
        throw std::invalid_argument("start must lie in the nonnegative orthant");
    const int n = static_cast<int>(psi.t.size());
    const Mat Pt = refl.P().transpose();

    // ell^{m+1}_i(t_k) = max_{j<=k} [ (P^T ell^m)_i(t_j) - x0_i - psi_i(t_j) ]_+
    Mat ell = Mat::Zero(n, d);
    Mat next(n, d);
    int sweep = 0;
    double delta = 0.0;
    for (; sweep < opts.max_sweeps; ++sweep) {
        const Mat drive = ell * refl.P();  // row k holds (P^T ell(t_k))^T
        for (int i = 0; i < d; ++i) {
            double runmax = 0.0;
            for (int k = 0; k < n; ++k) {
                const double cand = drive(k, i) - x0(i) - psi.x(k, i);
                runmax = std::max(runmax, cand);
                next(k, i) = runmax;
            }
        }
        delta = max_abs(Mat(next - ell));
        ell.swap(next);
        if (delta < opts.tol) break;
    }
    if (delta >= opts.tol)
        throw std::runtime_error(fmt::format(
            "Skorohod fixed point did not converge: increment {} after {} sweeps", delta,
            sweep));

    SkorohodSolution sol;
    sol.phi.t = psi.t;
    sol.ell.t = psi.t;
    sol.ell.x = ell;
    sol.phi.x = Mat(n, d);
    for (int k = 0; k < n; ++k)
        sol.phi.x.row(k) =
            x0.transpose() + psi.x.row(k) + ell.row(k) - (ell.row(k) * refl.P());
    sol.residual = complementarity_residual(sol, opts.eps_act);
    return sol;
}

LipschitzProbe lipschitz_probe(
    const ReflectionSpec& refl,
    const std::vector<std::pair<DiscretePath, DiscretePath>>& pairs,
    const std::vector<std::pair<Vec, Vec>>& starts) {
    if (pairs.size() != starts.size())
        throw std::invalid_argument("one start pair required per path pair");
    LipschitzProbe probe;
    for (std::size_t idx = 0; idx < pairs.size(); ++idx) {
        const auto& [psi1, psi2] = pairs[idx];
        if (psi1.t != psi2.t) throw std::invalid_argument("pairs must share grids");
        const auto& [xa, xb] = starts[idx];
        double denom = 0.0;
        for (int k = 0; k < static_cast<int>(psi1.t.size()); ++k)
            denom = std::max(denom, ((xa.transpose() + psi1.x.row(k)) -
                                     (xb.transpose() + psi2.x.row(k)))
                                        .cwiseAbs()
                                        .maxCoeff());
        if (denom == 0.0) {
            probe.skipped.push_back(static_cast<int>(idx));
            continue;
        }
        const auto s1 = sm_hr(psi1, refl, xa);
        const auto s2 = sm_hr(psi2, refl, xb);
        const double num = max_abs(Mat(s1.phi.x - s2.phi.x));
        probe.ratios.push_back(num / denom);
        probe.max_ratio = std::max(probe.max_ratio, num / denom);
    }
    return probe;
}

}  // namespace rbmkit::skorohod
