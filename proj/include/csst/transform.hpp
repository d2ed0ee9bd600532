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
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "csst/errors.hpp"
#include "csst/rng.hpp"

namespace csst {

using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;

enum class TransformKind { DctII, Dft };

inline std::string to_string(TransformKind k) { return k == TransformKind::DctII ? "dct2" : "dft"; }

/// Orthonormal real analysis matrix F (row k = k-th basis function), so
/// coefficients are x = F s and synthesis is s = F^T x.
///
/// DctII:  F_kj = sqrt((2 - delta_k0)/N) cos(pi/N (j + 1/2) k).
/// Dft:    the real Fourier basis (constant, cos/sin pairs, Nyquist row for
///         even N), which spans the same space as the unitary DFT.
class OrthonormalBasis {
   public:
    OrthonormalBasis(TransformKind kind, int n) : kind_(kind), f_(n, n) {
        detail::require(n >= 1, "transform length must be >= 1");
        const double N = n;
        const double pi = std::numbers::pi;
        if (kind == TransformKind::DctII) {
            for (int k = 0; k < n; ++k) {
                const double norm = std::sqrt((k == 0 ? 1.0 : 2.0) / N);
                for (int j = 0; j < n; ++j) f_(k, j) = norm * std::cos(pi / N * (j + 0.5) * k);
            }
        } else {
            const double c0 = std::sqrt(1.0 / N), c = std::sqrt(2.0 / N);
            int row = 0;
            for (int j = 0; j < n; ++j) f_(row, j) = c0;
            ++row;
            for (int k = 1; 2 * k < n; ++k) {
                for (int j = 0; j < n; ++j) {
                    f_(row, j) = c * std::cos(2 * pi * k * j / N);
                    f_(row + 1, j) = c * std::sin(2 * pi * k * j / N);
                }
                row += 2;
            }
            if (n % 2 == 0) {
                for (int j = 0; j < n; ++j) f_(row, j) = (j % 2 ? -c0 : c0);
            }
        }
    }

    TransformKind kind() const noexcept { return kind_; }
    int size() const noexcept { return static_cast<int>(f_.rows()); }
    const RMatrix &matrix() const noexcept { return f_; }

    RVector forward(const RVector &s) const {
        detail::require(s.size() == f_.cols(), "transform: length mismatch");
        return f_ * s;
    }
    RVector inverse(const RVector &x) const {
        detail::require(x.size() == f_.rows(), "transform: length mismatch");
        return f_.transpose() * x;
    }

   private:
    TransformKind kind_;
    RMatrix f_;
};

/// Process-wide cache of basis matrices keyed by (kind, N). Thread safe;
/// returned bases are immutable.
inline std::shared_ptr<const OrthonormalBasis> basis(TransformKind kind, int n) {
    static std::mutex mu;
    static std::map<std::pair<int, int>, std::shared_ptr<const OrthonormalBasis>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto &slot = cache[{static_cast<int>(kind), n}];
    if (!slot) slot = std::make_shared<const OrthonormalBasis>(kind, n);
    return slot;
}

inline RVector dct2_forward(const RVector &s) {
    detail::require(s.size() >= 1, "dct2_forward: empty input");
    return basis(TransformKind::DctII, static_cast<int>(s.size()))->forward(s);
}

inline RVector dct2_inverse(const RVector &x) {
    detail::require(x.size() >= 1, "dct2_inverse: empty input");
    return basis(TransformKind::DctII, static_cast<int>(x.size()))->inverse(x);
}

/// Sorted, 0-based sample indices Omega of size m out of N.
/// (Files and user-facing output use 1-based timestep labels.)
struct SamplingPlan {
    int N = 0;
    std::vector<int> omega;
    std::uint64_t seed = 0;

    int m() const noexcept { return static_cast<int>(omega.size()); }

    void validate() const {
        detail::require(N >= 1, "SamplingPlan: N must be >= 1");
        detail::require(!omega.empty() && m() <= N, "SamplingPlan: need 1 <= m <= N");
        for (size_t i = 0; i < omega.size(); ++i) {
            detail::require(omega[i] >= 0 && omega[i] < N, "SamplingPlan: index out of range");
            detail::require(i == 0 || omega[i - 1] < omega[i], "SamplingPlan: indices must be strictly increasing");
        }
    }

    static SamplingPlan full(int n) {
        SamplingPlan p;
        p.N = n;
        p.omega.resize(static_cast<size_t>(n));
        std::iota(p.omega.begin(), p.omega.end(), 0);
        p.validate();
        return p;
    }
};

/// Uniform m-subset by partial Fisher-Yates on the counter stream `seed`.
inline SamplingPlan sample_mask(int n, int m, std::uint64_t seed) {
    detail::require(n >= 1 && m >= 1 && m <= n, "sample_mask: need 1 <= m <= N");
    std::vector<int> idx(static_cast<size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    CounterRng rng(seed);
    for (int i = 0; i < m; ++i) {
        const auto j = static_cast<int>(static_cast<std::uint64_t>(i) + rng.below(static_cast<std::uint64_t>(n - i)));
        std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(j)]);
    }
    SamplingPlan plan;
    plan.N = n;
    plan.seed = seed;
    plan.omega.assign(idx.begin(), idx.begin() + m);
    std::sort(plan.omega.begin(), plan.omega.end());
    return plan;
}

/// P_Omega v: entries at Omega in ascending index order.
inline RVector subsample(const SamplingPlan &plan, const RVector &v) {
    detail::require(v.size() == plan.N, "subsample: length mismatch");
    RVector out(plan.m());
    for (int i = 0; i < plan.m(); ++i) out(i) = v(plan.omega[static_cast<size_t>(i)]);
    return out;
}

/// P_Omega^T y: scatter back into a length-N zero vector.
inline RVector scatter(const SamplingPlan &plan, const RVector &y) {
    detail::require(y.size() == plan.m(), "scatter: length mismatch");
    RVector out = RVector::Zero(plan.N);
    for (int i = 0; i < plan.m(); ++i) out(plan.omega[static_cast<size_t>(i)]) = y(i);
    return out;
}

/// A = sqrt(N/m) P_Omega F^T, applied as a composition (never stored densely).
class MeasurementOperator {
   public:
    MeasurementOperator(SamplingPlan plan, TransformKind kind = TransformKind::DctII)
        : plan_(std::move(plan)), basis_(basis(kind, plan_.N)) {
        plan_.validate();
        scale_ = std::sqrt(static_cast<double>(plan_.N) / plan_.m());
    }

    const SamplingPlan &plan() const noexcept { return plan_; }
    const OrthonormalBasis &transform() const noexcept { return *basis_; }
    TransformKind kind() const noexcept { return basis_->kind(); }
    double scale() const noexcept { return scale_; }
    int rows() const noexcept { return plan_.m(); }
    int cols() const noexcept { return plan_.N; }

    /// A x = sqrt(N/m) (F^T x)_Omega.
    RVector apply(const RVector &x) const {
        detail::require(x.size() == plan_.N, "apply: coefficient length mismatch");
        const RMatrix &f = basis_->matrix();
        RVector out(plan_.m());
        for (int i = 0; i < plan_.m(); ++i) out(i) = scale_ * f.col(plan_.omega[static_cast<size_t>(i)]).dot(x);
        return out;
    }

    /// A^T y = F scatter(sqrt(N/m) y).
    RVector adjoint(const RVector &y) const {
        detail::require(y.size() == plan_.m(), "adjoint: measurement length mismatch");
        const RMatrix &f = basis_->matrix();
        RVector out = RVector::Zero(plan_.N);
        for (int i = 0; i < plan_.m(); ++i) out += (scale_ * y(i)) * f.col(plan_.omega[static_cast<size_t>(i)]);
        return out;
    }

    /// Column k of A (length m).
    RVector column(int k) const {
        const RMatrix &f = basis_->matrix();
        RVector c(plan_.m());
        for (int i = 0; i < plan_.m(); ++i) c(i) = scale_ * f(k, plan_.omega[static_cast<size_t>(i)]);
        return c;
    }

    /// Dense m x N matrix; reserved for brute-force oracles at tiny N.
    RMatrix dense() const {
        RMatrix a(plan_.m(), plan_.N);
        for (int k = 0; k < plan_.N; ++k) a.col(k) = column(k);
        return a;
    }

   private:
    SamplingPlan plan_;
    std::shared_ptr<const OrthonormalBasis> basis_;
    double scale_ = 1;
};

/// Keeps the s largest-magnitude entries (ties: lower index wins).
inline RVector top_s_truncate(const RVector &x, int s) {
    detail::require(s >= 0 && s <= x.size(), "top_s_truncate: s out of range");
    std::vector<int> order(static_cast<size_t>(x.size()));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return std::abs(x(a)) > std::abs(x(b)); });
    RVector out = RVector::Zero(x.size());
    for (int i = 0; i < s; ++i) out(order[static_cast<size_t>(i)]) = x(order[static_cast<size_t>(i)]);
    return out;
}

struct TruncationPoint {
    int s = 0;
    double rmse = 0;
};

/// RMSE of the best s-term DCT approximation, ||x - x_s||_2 / sqrt(N).
inline std::vector<TruncationPoint> truncation_rmse_curve(const RVector &signal, const std::vector<int> &s_values) {
    const RVector x = dct2_forward(signal);
    const double sqrt_n = std::sqrt(static_cast<double>(x.size()));
    // sorted magnitudes once; the tail of the sorted squares gives every s
    std::vector<double> mags(static_cast<size_t>(x.size()));
    for (Eigen::Index k = 0; k < x.size(); ++k) mags[static_cast<size_t>(k)] = x(k) * x(k);
    std::sort(mags.begin(), mags.end(), std::greater<>());
    std::vector<double> tail(mags.size() + 1, 0.0);
    for (size_t i = mags.size(); i-- > 0;) tail[i] = tail[i + 1] + mags[i];

    std::vector<TruncationPoint> out;
    out.reserve(s_values.size());
    for (int s : s_values) {
        detail::require(s >= 0 && s <= x.size(), "truncation_rmse_curve: s out of range");
        out.push_back({s, std::sqrt(tail[static_cast<size_t>(s)]) / sqrt_n});
    }
    return out;
}

}  // namespace csst
