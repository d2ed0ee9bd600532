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

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "csst/errors.hpp"
#include "csst/pauli.hpp"
#include "csst/rng.hpp"

namespace csst {

/// One randomized product measurement: a basis word over {X,Y,Z} and the
/// n-bit outcome (site q at bit n-1-q).
struct Snapshot {
    PauliString bases;
    std::uint64_t outcome = 0;

    std::string bases_str() const { return bases.str(); }
    std::string bits_str() const {
        const int n = bases.num_qubits();
        std::string s(static_cast<size_t>(n), '0');
        for (int q = 0; q < n; ++q) {
            if ((outcome >> (n - 1 - q)) & 1) s[static_cast<size_t>(q)] = '1';
        }
        return s;
    }

    friend bool operator==(const Snapshot &a, const Snapshot &b) noexcept {
        return a.bases == b.bases && a.outcome == b.outcome;
    }
};

/// Snapshots collected at a single timestep.
struct ShadowDataset {
    int timestep = 0;
    std::uint64_t seed = 0;
    std::vector<Snapshot> snapshots;

    size_t size() const noexcept { return snapshots.size(); }
};

namespace detail {

// rho <- u_q rho u_q^dagger for a 2x2 unitary on one site.
inline void conjugate_site(CMatrix &rho, const Eigen::Matrix2cd &u, int site, int n) {
    const Eigen::Index d = rho.rows();
    const Eigen::Index stride = Eigen::Index{1} << (n - 1 - site);
    for (Eigen::Index i = 0; i < d; ++i) {
        if (i & stride) continue;
        const Eigen::Index i1 = i | stride;
        for (Eigen::Index c = 0; c < d; ++c) {
            const cplx a = rho(i, c), b = rho(i1, c);
            rho(i, c) = u(0, 0) * a + u(0, 1) * b;
            rho(i1, c) = u(1, 0) * a + u(1, 1) * b;
        }
    }
    const Eigen::Matrix2cd ua = u.conjugate();
    for (Eigen::Index i = 0; i < d; ++i) {
        if (i & stride) continue;
        const Eigen::Index i1 = i | stride;
        for (Eigen::Index r = 0; r < d; ++r) {
            const cplx a = rho(r, i), b = rho(r, i1);
            rho(r, i) = ua(0, 0) * a + ua(0, 1) * b;
            rho(r, i1) = ua(1, 0) * a + ua(1, 1) * b;
        }
    }
}

// Rotation that maps the measured Pauli onto Z: H for X, H S^dagger for Y.
inline Eigen::Matrix2cd basis_rotation(Pauli p) {
    const double s = 1.0 / std::sqrt(2.0);
    Eigen::Matrix2cd u;
    switch (p) {
        case Pauli::X: u << s, s, s, -s; break;
        case Pauli::Y: u << s, cplx(0, -s), s, cplx(0, s); break;
        default: u << 1, 0, 0, 1; break;
    }
    return u;
}

}  // namespace detail

/// Born distribution of rho measured in the product basis `bases`
/// (probabilities over the 2^n outcome indices).
inline std::vector<double> born_distribution(const DensityMatrix &rho, const PauliString &bases) {
    const int n = rho.num_qubits();
    detail::require(bases.num_qubits() == n, "basis word length must equal n");
    CMatrix r = rho.matrix();
    for (int q = 0; q < n; ++q) {
        const Pauli p = bases.at(q);
        detail::require(p != Pauli::I, "basis word must be over {X,Y,Z}");
        if (p != Pauli::Z) detail::conjugate_site(r, detail::basis_rotation(p), q, n);
    }
    std::vector<double> probs(static_cast<size_t>(r.rows()));
    for (Eigen::Index b = 0; b < r.rows(); ++b) {
        const double pb = r(b, b).real();
        if (pb < -1e-9 || pb > 1 + 1e-9 || !std::isfinite(pb)) {
            throw NumericalError("Born probability outside [0, 1]; state is invalid");
        }
        probs[static_cast<size_t>(b)] = std::max(pb, 0.0);
    }
    return probs;
}

/// Draws `n_shots` snapshots. Shot k uses the counter stream keyed by
/// derive_key(seed, {k}): n uniform basis letters, then one uniform for the
/// outcome. Born distributions are cached per basis word.
inline ShadowDataset sample_snapshots(const DensityMatrix &rho, int n_shots, std::uint64_t seed, int timestep = 0) {
    detail::require(n_shots >= 1, "n_shots must be >= 1");
    const int n = rho.num_qubits();
    ShadowDataset ds;
    ds.timestep = timestep;
    ds.seed = seed;
    ds.snapshots.reserve(static_cast<size_t>(n_shots));

    std::map<std::uint64_t, std::vector<double>> cdf_cache;
    for (int k = 0; k < n_shots; ++k) {
        CounterRng rng(derive_key(seed, {static_cast<std::uint64_t>(k)}));
        PauliString bases(n);
        for (int q = 0; q < n; ++q) bases.set(q, static_cast<Pauli>(1 + rng.below(3)));

        auto it = cdf_cache.find(bases.packed());
        if (it == cdf_cache.end()) {
            std::vector<double> cdf = born_distribution(rho, bases);
            for (size_t i = 1; i < cdf.size(); ++i) cdf[i] += cdf[i - 1];
            it = cdf_cache.emplace(bases.packed(), std::move(cdf)).first;
        }
        const auto &cdf = it->second;
        const double u = rng.uniform() * cdf.back();
        auto pos = std::upper_bound(cdf.begin(), cdf.end(), u);
        // Skip zero-probability outcomes that share the final cumulative value.
        if (pos == cdf.end()) pos = std::lower_bound(cdf.begin(), cdf.end(), cdf.back());
        ds.snapshots.push_back({bases, static_cast<std::uint64_t>(pos - cdf.begin())});
    }
    return ds;
}

namespace detail {

// +1 / -1 when the basis diagonalizes p, 0 otherwise. The value of the
// single-shot estimator is 3^w times this.
inline int shot_sign(const Snapshot &snap, const PauliString &p) noexcept {
    const std::uint64_t mask = p.packed_support();
    if ((snap.bases.packed() & mask) != (p.packed() & mask)) return 0;
    return (std::popcount(snap.outcome & p.support_mask()) & 1) ? -1 : 1;
}

inline double pow3(int w) { return std::pow(3.0, w); }

}  // namespace detail

/// prod_j W_j with W_j = 1 (identity), 3(-1)^{b_j} (basis matches), 0 otherwise.
inline double single_shot_value(const Snapshot &snap, const PauliString &p) {
    detail::require(snap.bases.num_qubits() == p.num_qubits(), "snapshot/Pauli length mismatch");
    return detail::shot_sign(snap, p) * detail::pow3(p.weight());
}

namespace detail {

// Integer sum of signs over [begin, end): exact and order independent.
inline long long sign_sum(const ShadowDataset &ds, const PauliString &p, size_t begin, size_t end) {
    long long acc = 0;
    for (size_t i = begin; i < end; ++i) acc += shot_sign(ds.snapshots[i], p);
    return acc;
}

}  // namespace detail

/// Sample mean of single-shot values; unbiased for Tr(P rho).
inline double estimate_pauli(const ShadowDataset &ds, const PauliString &p) {
    detail::require(!ds.snapshots.empty(), "estimate_pauli: empty dataset");
    detail::require(ds.snapshots.front().bases.num_qubits() == p.num_qubits(), "snapshot/Pauli length mismatch");
    const long long s = detail::sign_sum(ds, p, 0, ds.size());
    return detail::pow3(p.weight()) * static_cast<double>(s) / static_cast<double>(ds.size());
}

/// Median of k contiguous batch means; trailing remainder snapshots are
/// dropped. An even k takes the average of the two central means.
inline double estimate_pauli_mom(const ShadowDataset &ds, const PauliString &p, int k_batches) {
    detail::require(k_batches >= 1, "k_batches must be >= 1");
    detail::require(ds.size() >= static_cast<size_t>(k_batches), "dataset smaller than k_batches");
    detail::require(ds.snapshots.front().bases.num_qubits() == p.num_qubits(), "snapshot/Pauli length mismatch");
    const size_t batch = ds.size() / static_cast<size_t>(k_batches);
    const double scale = detail::pow3(p.weight()) / static_cast<double>(batch);
    std::vector<double> means(static_cast<size_t>(k_batches));
    for (size_t b = 0; b < means.size(); ++b) {
        means[b] = scale * static_cast<double>(detail::sign_sum(ds, p, b * batch, (b + 1) * batch));
    }
    std::sort(means.begin(), means.end());
    const size_t mid = means.size() / 2;
    return means.size() % 2 ? means[mid] : 0.5 * (means[mid - 1] + means[mid]);
}

/// Estimates for a whole observable family from one dataset.
inline std::vector<double> estimate_all(const ShadowDataset &ds, const std::vector<PauliString> &family) {
    std::vector<double> out;
    out.reserve(family.size());
    for (const auto &p : family) out.push_back(estimate_pauli(ds, p));
    return out;
}

namespace detail {

// Ceiling that ignores relative floating noise below 1e-12, so formula
// values that are mathematically integral do not round up spuriously.
inline std::uint64_t ceil_count(double x) {
    return static_cast<std::uint64_t>(std::ceil(x * (1 - 1e-12)));
}

inline void check_budget_args(int w, double eps, double delta, double m_family) {
    require(w >= 0, "weight must be >= 0");
    require(eps > 0 && std::isfinite(eps), "eps must be positive");
    require(delta > 0 && delta < 1, "delta must lie in (0, 1)");
    require(m_family >= 1, "observable count must be >= 1");
}

}  // namespace detail

/// Bernstein snapshot count with sigma^2 <= 3^w, range 2*3^w and a union
/// bound over the family: ceil(3^w/eps^2 * ln(2M/delta) * (2 + 2eps/3)).
inline std::uint64_t bernstein_shots(int w, double eps, double delta, double m_family) {
    detail::check_budget_args(w, eps, delta, m_family);
    const double v = detail::pow3(w) / (eps * eps) * std::log(2 * m_family / delta) * (2 + 2 * eps / 3);
    return detail::ceil_count(v);
}

struct MomBudget {
    std::uint64_t shots = 0;
    std::uint64_t k_batches = 0;
};

/// Median-of-means count ceil(32 ln(M/delta) 3^w / eps^2) with
/// K = ceil(8 ln(M/delta)) bumped to the next odd integer.
inline MomBudget mom_shots(int w, double eps, double delta, double m_family) {
    detail::check_budget_args(w, eps, delta, m_family);
    const double log_term = std::log(m_family / delta);
    MomBudget b;
    b.shots = detail::ceil_count(32 * log_term * detail::pow3(w) / (eps * eps));
    b.k_batches = std::max<std::uint64_t>(1, detail::ceil_count(8 * log_term));
    if (b.k_batches % 2 == 0) ++b.k_batches;
    return b;
}

struct BaselineBudget {
    std::uint64_t per_timestep = 0;
    std::uint64_t total = 0;
};

/// Shadows at every timestep with the failure probability split as delta/N.
inline BaselineBudget baseline_budget(int w, double eps_rms, double m_family, double delta, int n_timesteps) {
    detail::require(n_timesteps >= 1, "timestep count must be >= 1");
    BaselineBudget b;
    b.per_timestep = bernstein_shots(w, eps_rms, delta / n_timesteps, m_family);
    b.total = b.per_timestep * static_cast<std::uint64_t>(n_timesteps);
    return b;
}

}  // namespace csst
