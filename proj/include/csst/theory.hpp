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
#include <cmath>
#include <cstdint>
#include <numbers>

#include "csst/errors.hpp"
#include "csst/shadows.hpp"

namespace csst {

/// Stability and sampling constants. None of these are pinned down by the
/// underlying theory; the defaults are placeholders and every output that
/// uses them reports them alongside.
struct TheoryParams {
    double c1 = 4.0;
    double c2 = 4.0;
    double rip_target = 0.6;  // delta_2s, must stay below 4/sqrt(41)
    double m_rate_constant = 1.0;

    static double rip_threshold() { return 4.0 / std::sqrt(41.0); }

    void validate() const {
        detail::require(c1 > 0 && c2 > 0 && m_rate_constant > 0, "TheoryParams: constants must be positive");
        detail::require(rip_target > 0 && rip_target < rip_threshold(), "TheoryParams: need 0 < delta_2s < 4/sqrt(41)");
    }
};

/// m = min(N, ceil(C_m s ln^2(max(s,2)) ln N)).
inline std::uint64_t required_timesteps(int s, int n, const TheoryParams &tp = {}) {
    tp.validate();
    detail::require(s >= 1 && s <= n, "required_timesteps: need 1 <= s <= N");
    const double l = std::log(std::max(s, 2));
    const double raw = tp.m_rate_constant * s * l * l * std::log(static_cast<double>(n));
    return std::min<std::uint64_t>(static_cast<std::uint64_t>(n), detail::ceil_count(raw));
}

namespace detail {

inline void check_ratio_args(double n, double m, double m_family, double delta) {
    require(n >= 1 && m >= 1 && m <= n, "shot ratio: need 1 <= m <= N");
    require(m_family >= 1, "shot ratio: observable count must be >= 1");
    require(delta > 0 && delta < 1, "shot ratio: delta must lie in (0, 1)");
}

}  // namespace detail

/// (N/m) ln(NM/delta) / ln(mM/delta), constants suppressed.
inline double shot_ratio_exact(double n, double m, double m_family, double delta) {
    detail::check_ratio_args(n, m, m_family, delta);
    return (n / m) * std::log(n * m_family / delta) / std::log(m * m_family / delta);
}

/// B_RMS(s) = c1 ln(N/s) / sqrt(s).
inline double b_rms(double s, double n, double c1) {
    detail::require(s >= 1 && s <= n, "b_rms: need 1 <= s <= N");
    detail::require(c1 > 0, "b_rms: c1 must be positive");
    return c1 * std::log(n / s) / std::sqrt(s);
}

/// shot_ratio_exact scaled by ((eps_rms - B)/eps_rms)^2; requires B < eps_rms.
inline double shot_ratio_approx(double n, double m, double m_family, double delta, double eps_rms, double b) {
    detail::require(eps_rms > 0, "shot_ratio_approx: eps_rms must be positive");
    detail::require(b >= 0, "shot_ratio_approx: B_RMS must be >= 0");
    if (b >= eps_rms) {
        throw InfeasibleTolerance("shot_ratio_approx: compressibility term B_RMS >= eps_rms; target not reachable at this s");
    }
    const double f = (eps_rms - b) / eps_rms;
    return shot_ratio_exact(n, m, m_family, delta) * f * f;
}

/// ||x - x_s||_1 <= C_r / (r - 1) s^{1-r} for sorted magnitudes |x|_(k) <= C_r k^{-r}.
inline double l1_tail_powerlaw(double c_r, double r, double s) {
    detail::require(r > 1, "l1_tail_powerlaw: need r > 1");
    detail::require(c_r > 0, "l1_tail_powerlaw: C_r must be positive");
    detail::require(s >= 1, "l1_tail_powerlaw: need s >= 1");
    return c_r / (r - 1) * std::pow(s, 1 - r);
}

/// Per-coefficient upper bound on |DCT-II(s)_k| for the sampled damped
/// cosine s_n = e^{-gamma n dt} cos(omega n dt + phi), n = 0..N-1:
///
///   1/2 sqrt((2 - delta_k0)/N) sum_{sigma=+-} min{N, 2/sqrt((1-e^{-G})^2 + 4 e^{-G} sin^2((theta + sigma a_k)/2))}
///
/// with G = gamma dt, theta = omega dt, a_k = pi k / N. A vanishing
/// denominator saturates at N.
inline Eigen::VectorXd dct_envelope_bound(double gamma, double omega, double dt, int n, double /*phi*/ = 0.0) {
    detail::require(gamma >= 0 && std::isfinite(gamma), "dct_envelope_bound: gamma must be >= 0");
    detail::require(dt > 0, "dct_envelope_bound: dt must be positive");
    detail::require(n >= 1, "dct_envelope_bound: N must be >= 1");
    detail::require(std::isfinite(omega), "dct_envelope_bound: omega must be finite");
    const double big_gamma = gamma * dt;
    const double theta = omega * dt;
    const double decay = std::exp(-big_gamma);
    const double a = (1 - decay) * (1 - decay);
    Eigen::VectorXd out(n);
    for (int k = 0; k < n; ++k) {
        const double alpha_k = std::numbers::pi * k / n;
        double total = 0;
        for (int sigma : {-1, 1}) {
            const double sn = std::sin((theta + sigma * alpha_k) / 2);
            const double denom = std::sqrt(a + 4 * decay * sn * sn);
            total += (denom > 0) ? std::min<double>(n, 2 / denom) : static_cast<double>(n);
        }
        out(k) = 0.5 * std::sqrt((k == 0 ? 1.0 : 2.0) / n) * total;
    }
    return out;
}

struct CsstBudget {
    std::uint64_t per_timestep = 0;
    std::uint64_t total = 0;
};

/// Shots for shadows at m sampled timesteps: Bernstein count at accuracy
/// eps_rms/c2 and per-timestep failure probability delta_st/m, where
/// delta_st = st_fraction * delta (the remainder is left to the RIP event).
inline CsstBudget csst_budget(int w, double eps_rms, double m_family, double delta, int m, double st_fraction = 0.5,
                              const TheoryParams &tp = {}) {
    tp.validate();
    detail::require(m >= 1, "csst_budget: m must be >= 1");
    detail::require(st_fraction > 0 && st_fraction <= 1, "csst_budget: st_fraction must lie in (0, 1]");
    CsstBudget b;
    b.per_timestep = bernstein_shots(w, eps_rms / tp.c2, st_fraction * delta / m, m_family);
    b.total = b.per_timestep * static_cast<std::uint64_t>(m);
    return b;
}

}  // namespace csst
