// Copyright 2026 The CSST Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

#include "csst/errors.hpp"
#include "csst/transform.hpp"

namespace csst {

/// Penalized problem  min_z (1/2N) ||A z - y||^2 + alpha ||z||_1,
/// with N the number of columns of A (the full grid length).
struct LassoConfig {
    double alpha = 1e-4;
    int max_iters = 100000;  // sweeps
    double tol = 1e-8;       // max coordinate change per sweep
    bool track_objective = false;

    void validate() const {
        detail::require(alpha >= 0 && std::isfinite(alpha), "LassoConfig: alpha must be >= 0");
        detail::require(tol > 0, "LassoConfig: tol must be > 0");
        detail::require(max_iters >= 1, "LassoConfig: max_iters must be >= 1");
    }
};

struct ReconstructionResult {
    RVector coefficients;  // x_hat
    RVector signal;        // s_hat = F^T x_hat
    double alpha = 0;
    int iterations = 0;
    double residual_norm = 0;  // ||A x_hat - y||_2
    bool converged = false;
    std::vector<double> objective_history;  // per sweep, when tracked
};

inline double soft_threshold(double v, double t) noexcept {
    if (v > t) return v - t;
    if (v < -t) return v + t;
    return 0.0;
}

inline double lasso_objective(const RVector &residual, const RVector &x, double alpha, int n) {
    return residual.squaredNorm() / (2.0 * n) + alpha * x.lpNorm<1>();
}

/// Cyclic coordinate descent with exact single-coordinate soft-threshold
/// updates and residual bookkeeping. The gathered columns of A are built
/// once per solver and reused across calls (warm-started alpha paths).
class LassoSolver {
   public:
    explicit LassoSolver(const MeasurementOperator &op) : op_(op), cols_(op.rows(), op.cols()) {
        const RMatrix &f = op.transform().matrix();
        for (int i = 0; i < op.rows(); ++i) {
            cols_.row(i) = op.scale() * f.col(op.plan().omega[static_cast<size_t>(i)]).transpose();
        }
        col_sq_ = cols_.colwise().squaredNorm().transpose();
    }

    const MeasurementOperator &op() const noexcept { return op_; }

    /// Without a warm start, small alphas are reached along a geometric
    /// continuation path from alpha_max = ||A^T y||_inf / N (5 points per
    /// decade). Cold coordinate descent at tiny alpha on an underdetermined
    /// system stalls on dense iterates; the path keeps iterates sparse.
    ReconstructionResult solve(const RVector &y, const LassoConfig &cfg,
                               const std::optional<RVector> &warm_start = std::nullopt) const {
        cfg.validate();
        const int m = op_.rows();
        const int n = op_.cols();
        detail::require(y.size() == m, "lasso: measurement length mismatch");
        if (!y.allFinite()) throw NumericalError("lasso: non-finite measurements");

        RVector x = RVector::Zero(n);
        RVector r = y;
        ReconstructionResult res;
        res.alpha = cfg.alpha;
        int sweeps = 0;
        // alpha >= ||A^T y||_inf / N: zero is optimal. The slack absorbs the
        // rounding of ||A^T y||_inf between evaluation orders.
        const double corr_max = (cols_.transpose() * y).cwiseAbs().maxCoeff();
        if (cfg.alpha * n >= corr_max * (1 - 64 * std::numeric_limits<double>::epsilon())) {
            if (warm_start) detail::require(warm_start->size() == n, "lasso: warm start length mismatch");
            if (cfg.track_objective) res.objective_history.push_back(lasso_objective(r, x, cfg.alpha, n));
            res.converged = true;
            res.coefficients = x;
            res.signal = op_.transform().inverse(x);
            res.residual_norm = y.norm();
            return res;
        }
        if (warm_start) {
            detail::require(warm_start->size() == n, "lasso: warm start length mismatch");
            x = *warm_start;
            r = y - cols_ * x;
        } else {
            const double alpha_max = corr_max / n;
            const double step = std::pow(10.0, -0.2);
            LassoConfig stage = cfg;
            stage.track_objective = false;
            for (double a = alpha_max * step; a > cfg.alpha && sweeps < cfg.max_iters; a *= step) {
                stage.alpha = a;
                stage.max_iters = cfg.max_iters - sweeps;
                sweeps += descend(r, x, stage, nullptr);
            }
        }
        if (cfg.track_objective) res.objective_history.push_back(lasso_objective(r, x, cfg.alpha, n));
        bool converged = false;
        if (sweeps < cfg.max_iters) {
            LassoConfig last = cfg;
            last.max_iters = cfg.max_iters - sweeps;
            sweeps += descend(r, x, last, &res.objective_history, &converged);
        }

        res.converged = converged;
        res.iterations = sweeps;
        res.coefficients = x;
        res.signal = op_.transform().inverse(x);
        res.residual_norm = (cols_ * x - y).norm();
        return res;
    }

   private:
    // Coordinate descent from (x, r = y - A x) at cfg.alpha; returns sweeps used.
    int descend(RVector &r, RVector &x, const LassoConfig &cfg, std::vector<double> *history,
                bool *converged = nullptr) const {
        const int n = op_.cols();
        const double thresh = cfg.alpha * n;
        auto update = [&](int k) -> double {
            const double ak = col_sq_(k);
            const double old = x(k);
            if (ak <= 0) {
                x(k) = 0;
                return std::abs(old);
            }
            const double rho = cols_.col(k).dot(r) + ak * old;
            const double nv = soft_threshold(rho, thresh) / ak;
            const double delta = nv - old;
            if (delta != 0) {
                r.noalias() -= delta * cols_.col(k);
                x(k) = nv;
            }
            return std::abs(delta);
        };

        std::vector<int> active;
        int sweeps = 0;
        bool full_pass = true;
        while (sweeps < cfg.max_iters) {
            double max_change = 0;
            if (full_pass) {
                for (int k = 0; k < n; ++k) max_change = std::max(max_change, update(k));
                active.clear();
                for (int k = 0; k < n; ++k) {
                    if (x(k) != 0) active.push_back(k);
                }
            } else {
                for (int k : active) max_change = std::max(max_change, update(k));
            }
            ++sweeps;
            if (history && cfg.track_objective) history->push_back(lasso_objective(r, x, cfg.alpha, n));
            if (!x.allFinite()) throw NumericalError("lasso: iterate became non-finite");
            if (max_change <= cfg.tol) {
                if (full_pass) {
                    if (converged) *converged = true;
                    break;
                }
                full_pass = true;  // active set settled; confirm on all coordinates
            } else {
                full_pass = false;
            }
        }
        return sweeps;
    }

    MeasurementOperator op_;
    RMatrix cols_;
    RVector col_sq_;
};

inline ReconstructionResult lasso_cd(const MeasurementOperator &op, const RVector &y, const LassoConfig &cfg) {
    return LassoSolver(op).solve(y, cfg);
}

/// y = sqrt(N/m) * samples, then LASSO in the DCT-II basis.
inline ReconstructionResult reconstruct_signal(const SamplingPlan &plan, const RVector &samples, double alpha,
                                               LassoConfig cfg = {}) {
    detail::require(samples.size() == plan.m(), "reconstruct_signal: need one sample per index in Omega");
    MeasurementOperator op(plan);
    cfg.alpha = alpha;
    return lasso_cd(op, op.scale() * samples, cfg);
}

/// n log-spaced points from lo to hi inclusive.
inline std::vector<double> log_grid(double lo, double hi, int n) {
    detail::require(lo > 0 && hi >= lo && n >= 1, "log_grid: need 0 < lo <= hi and n >= 1");
    std::vector<double> g(static_cast<size_t>(n));
    if (n == 1) {
        g[0] = lo;
        return g;
    }
    const double a = std::log10(lo), b = std::log10(hi);
    for (int i = 0; i < n; ++i) g[static_cast<size_t>(i)] = std::pow(10.0, a + (b - a) * i / (n - 1));
    g.front() = lo;
    g.back() = hi;
    return g;
}

/// 30 points, 1e-7 .. 1e-2.
inline std::vector<double> default_alpha_grid() { return log_grid(1e-7, 1e-2, 30); }

struct AlphaSweepEntry {
    double alpha = 0;
    ReconstructionResult result;
    std::optional<double> rmse;  // against truth, when supplied
};

struct AlphaSweep {
    std::vector<AlphaSweepEntry> entries;  // in input grid order
    std::optional<size_t> best;            // argmin rmse (first on ties)
};

/// One reconstruction per grid value, solved from the largest alpha down and
/// warm-started along that path.
inline AlphaSweep alpha_sweep(const SamplingPlan &plan, const RVector &samples, const std::vector<double> &alpha_grid,
                              const std::optional<RVector> &truth = std::nullopt, LassoConfig cfg = {}) {
    detail::require(!alpha_grid.empty(), "alpha_sweep: empty grid");
    detail::require(samples.size() == plan.m(), "alpha_sweep: need one sample per index in Omega");
    if (truth) detail::require(truth->size() == plan.N, "alpha_sweep: truth length mismatch");

    MeasurementOperator op(plan);
    LassoSolver solver(op);
    const RVector y = op.scale() * samples;

    std::vector<size_t> order(alpha_grid.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) { return alpha_grid[a] > alpha_grid[b]; });

    AlphaSweep out;
    out.entries.resize(alpha_grid.size());
    std::optional<RVector> warm;
    for (size_t idx : order) {
        cfg.alpha = alpha_grid[idx];
        ReconstructionResult r = solver.solve(y, cfg, warm);
        warm = r.coefficients;
        AlphaSweepEntry e;
        e.alpha = cfg.alpha;
        if (truth) e.rmse = std::sqrt((r.signal - *truth).squaredNorm() / static_cast<double>(plan.N));
        e.result = std::move(r);
        out.entries[idx] = std::move(e);
    }
    if (truth) {
        size_t best = 0;
        for (size_t i = 1; i < out.entries.size(); ++i) {
            if (*out.entries[i].rmse < *out.entries[best].rmse) best = i;
        }
        out.best = best;
    }
    return out;
}

/// Residual-targeted alpha: the constrained form  min ||z||_1 s.t.
/// ||A z - y||_2 <= eta  is approximated by the largest alpha whose LASSO
/// residual stays within eta. The grid brackets the answer and log-space
/// bisection refines it. Returns the grid minimum when even that misses eta.
inline double alpha_for_residual(const SamplingPlan &plan, const RVector &samples, double eta,
                                 const std::vector<double> &alpha_grid = default_alpha_grid(), LassoConfig cfg = {},
                                 int bisection_steps = 30) {
    detail::require(eta >= 0, "alpha_for_residual: eta must be >= 0");
    detail::require(!alpha_grid.empty(), "alpha_for_residual: empty grid");
    MeasurementOperator op(plan);
    LassoSolver solver(op);
    const RVector y = op.scale() * samples;
    auto residual = [&](double a) {
        cfg.alpha = a;
        return solver.solve(y, cfg).residual_norm;
    };

    std::vector<double> grid = alpha_grid;
    std::sort(grid.begin(), grid.end(), std::greater<>());
    std::optional<double> hi_fail;  // largest-known alpha above the answer
    for (double a : grid) {
        if (residual(a) <= eta) {
            if (!hi_fail) return a;
            double lo = std::log(a), hi = std::log(*hi_fail);
            for (int i = 0; i < bisection_steps; ++i) {
                const double mid = 0.5 * (lo + hi);
                (residual(std::exp(mid)) <= eta ? lo : hi) = mid;
            }
            return std::exp(lo);
        }
        hi_fail = a;
    }
    return grid.back();
}

/// Exact restricted isometry constant of order s by exhaustive enumeration
/// of column supports: max over |S| = s of max(lambda_max - 1, 1 - lambda_min)
/// of A_S^T A_S. Capped at N <= 16, s <= 3.
inline double rip_constant_bruteforce(const RMatrix &a, int s) {
    const int n = static_cast<int>(a.cols());
    if (n > 16 || s > 3) throw ResourceLimit("rip_constant_bruteforce: requires N <= 16 and s <= 3");
    detail::require(s >= 1 && s <= n, "rip_constant_bruteforce: need 1 <= s <= N");

    double delta = 0;
    std::vector<int> support(static_cast<size_t>(s));
    std::iota(support.begin(), support.end(), 0);
    while (true) {
        RMatrix sub(a.rows(), s);
        for (int i = 0; i < s; ++i) sub.col(i) = a.col(support[static_cast<size_t>(i)]);
        Eigen::SelfAdjointEigenSolver<RMatrix> es(sub.transpose() * sub, Eigen::EigenvaluesOnly);
        const auto &ev = es.eigenvalues();
        delta = std::max({delta, ev.maxCoeff() - 1.0, 1.0 - ev.minCoeff()});

        int i = s - 1;
        while (i >= 0 && support[static_cast<size_t>(i)] == n - s + i) --i;
        if (i < 0) break;
        ++support[static_cast<size_t>(i)];
        for (int j = i + 1; j < s; ++j) support[static_cast<size_t>(j)] = support[static_cast<size_t>(j - 1)] + 1;
    }
    return delta;
}

}  // namespace csst
