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
#include <complex>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "csst/errors.hpp"

namespace csst {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

enum class Pauli : std::uint8_t { I = 0, X = 1, Y = 2, Z = 3 };

constexpr char pauli_char(Pauli p) noexcept { return "IXYZ"[static_cast<int>(p)]; }

/// Length-n word over {I,X,Y,Z}, packed two bits per site. Site 0 is the
/// leftmost letter and the most significant tensor factor.
class PauliString {
   public:
    static constexpr int kMaxQubits = 32;

    PauliString() = default;

    /// The all-identity word on n qubits.
    explicit PauliString(int n) : n_(check_n(n)) {}

    static PauliString parse(std::string_view word) {
        PauliString p(static_cast<int>(word.size()));
        for (int q = 0; q < p.n_; ++q) {
            switch (word[static_cast<size_t>(q)]) {
                case 'I': break;
                case 'X': p.set(q, Pauli::X); break;
                case 'Y': p.set(q, Pauli::Y); break;
                case 'Z': p.set(q, Pauli::Z); break;
                default: throw InvalidArgument("invalid Pauli letter in \"" + std::string(word) + "\"");
            }
        }
        return p;
    }

    int num_qubits() const noexcept { return n_; }
    int weight() const noexcept { return weight_; }

    Pauli at(int q) const noexcept { return static_cast<Pauli>((bits_ >> (2 * q)) & 3U); }

    void set(int q, Pauli letter) {
        detail::require(q >= 0 && q < n_, "Pauli site out of range");
        const bool was = at(q) != Pauli::I;
        bits_ &= ~(std::uint64_t{3} << (2 * q));
        bits_ |= std::uint64_t{static_cast<std::uint8_t>(letter)} << (2 * q);
        weight_ += static_cast<int>(letter != Pauli::I) - static_cast<int>(was);
    }

    /// Bitmask of sites carrying X or Y (bit n-1-q for site q, matching the
    /// big-endian computational basis index).
    std::uint64_t flip_mask() const noexcept {
        std::uint64_t m = 0;
        for (int q = 0; q < n_; ++q) {
            const Pauli p = at(q);
            if (p == Pauli::X || p == Pauli::Y) m |= std::uint64_t{1} << (n_ - 1 - q);
        }
        return m;
    }

    /// Bitmask of non-identity sites in computational-basis bit order.
    std::uint64_t support_mask() const noexcept {
        std::uint64_t m = 0;
        for (int q = 0; q < n_; ++q) {
            if (at(q) != Pauli::I) m |= std::uint64_t{1} << (n_ - 1 - q);
        }
        return m;
    }

    /// Two-bit packed letters; site q occupies bits [2q, 2q+1].
    std::uint64_t packed() const noexcept { return bits_; }

    /// Packed mask with 0b11 on every non-identity site.
    std::uint64_t packed_support() const noexcept {
        std::uint64_t m = 0;
        for (int q = 0; q < n_; ++q) {
            if (at(q) != Pauli::I) m |= std::uint64_t{3} << (2 * q);
        }
        return m;
    }

    std::string str() const {
        std::string s(static_cast<size_t>(n_), 'I');
        for (int q = 0; q < n_; ++q) s[static_cast<size_t>(q)] = pauli_char(at(q));
        return s;
    }

    friend bool operator==(const PauliString &a, const PauliString &b) noexcept {
        return a.n_ == b.n_ && a.bits_ == b.bits_;
    }

   private:
    static int check_n(int n) {
        detail::require(n >= 1 && n <= kMaxQubits, "qubit count must be in [1, 32]");
        return n;
    }

    int n_ = 0;
    int weight_ = 0;
    std::uint64_t bits_ = 0;
};

inline int weight(const PauliString &p) noexcept { return p.weight(); }

/// Binomial coefficient, exact for the small arguments used here.
inline std::uint64_t binomial(int n, int k) {
    if (k < 0 || k > n) return 0;
    std::uint64_t r = 1;
    for (int i = 1; i <= k; ++i) r = r * static_cast<std::uint64_t>(n - k + i) / static_cast<std::uint64_t>(i);
    return r;
}

/// M = sum_{k=1}^{w_max} C(n,k) 3^k.
inline std::uint64_t pauli_family_size(int n, int w_max) {
    std::uint64_t total = 0, pow3 = 1;
    for (int k = 1; k <= w_max; ++k) {
        pow3 *= 3;
        total += binomial(n, k) * pow3;
    }
    return total;
}

/// All Pauli strings on n qubits with weight in [1, w_max].
///
/// Order: ascending weight; within a weight sector, site subsets in
/// lexicographic order, then letter assignments with X<Y<Z and the leftmost
/// site most significant.
inline std::vector<PauliString> enumerate_paulis(int n, int w_max) {
    detail::require(n >= 1 && n <= PauliString::kMaxQubits, "qubit count must be in [1, 32]");
    detail::require(w_max >= 1 && w_max <= n, "w_max must satisfy 1 <= w_max <= n");

    std::vector<PauliString> out;
    out.reserve(pauli_family_size(n, w_max));
    for (int k = 1; k <= w_max; ++k) {
        std::vector<int> sites(static_cast<size_t>(k));
        for (int i = 0; i < k; ++i) sites[static_cast<size_t>(i)] = i;
        while (true) {
            std::vector<int> letters(static_cast<size_t>(k), 0);
            while (true) {
                PauliString p(n);
                for (int i = 0; i < k; ++i) {
                    p.set(sites[static_cast<size_t>(i)], static_cast<Pauli>(letters[static_cast<size_t>(i)] + 1));
                }
                out.push_back(p);
                int i = k - 1;
                while (i >= 0 && letters[static_cast<size_t>(i)] == 2) letters[static_cast<size_t>(i--)] = 0;
                if (i < 0) break;
                ++letters[static_cast<size_t>(i)];
            }
            // next k-subset of {0..n-1}
            int i = k - 1;
            while (i >= 0 && sites[static_cast<size_t>(i)] == n - k + i) --i;
            if (i < 0) break;
            ++sites[static_cast<size_t>(i)];
            for (int j = i + 1; j < k; ++j) sites[static_cast<size_t>(j)] = sites[static_cast<size_t>(j - 1)] + 1;
        }
    }
    return out;
}

/// Single-site matrix element <r|P|r^flip(P)>.
inline cplx pauli_site_element(Pauli p, int row_bit) noexcept {
    switch (p) {
        case Pauli::Y: return row_bit ? cplx(0, 1) : cplx(0, -1);
        case Pauli::Z: return row_bit ? cplx(-1, 0) : cplx(1, 0);
        default: return {1, 0};
    }
}

inline CMatrix single_qubit_pauli(Pauli p) {
    CMatrix m = CMatrix::Zero(2, 2);
    switch (p) {
        case Pauli::I: m << 1, 0, 0, 1; break;
        case Pauli::X: m << 0, 1, 1, 0; break;
        case Pauli::Y: m << 0, cplx(0, -1), cplx(0, 1), 0; break;
        case Pauli::Z: m << 1, 0, 0, -1; break;
    }
    return m;
}

/// Kronecker product of single-site factors. Refuses n above `max_qubits`.
inline CMatrix pauli_matrix(const PauliString &p, int max_qubits = 8) {
    const int n = p.num_qubits();
    if (n > max_qubits) {
        throw ResourceLimit("pauli_matrix: n=" + std::to_string(n) + " exceeds cap " + std::to_string(max_qubits));
    }
    const Eigen::Index d = Eigen::Index{1} << n;
    const std::uint64_t flip = p.flip_mask();
    CMatrix m = CMatrix::Zero(d, d);
    for (Eigen::Index r = 0; r < d; ++r) {
        cplx v(1, 0);
        for (int q = 0; q < n; ++q) v *= pauli_site_element(p.at(q), static_cast<int>((r >> (n - 1 - q)) & 1));
        m(r, static_cast<Eigen::Index>(static_cast<std::uint64_t>(r) ^ flip)) = v;
    }
    return m;
}

/// n-qubit density matrix (d = 2^n). Construction through `from_matrix`
/// validates Hermiticity, unit trace and numerical positivity.
class DensityMatrix {
   public:
    static constexpr double kHermitianTol = 1e-10;
    static constexpr double kTraceTol = 1e-9;
    static constexpr double kPositivityTol = 1e-8;

    DensityMatrix() = default;

    static DensityMatrix from_matrix(CMatrix rho) {
        DensityMatrix out = unchecked(std::move(rho));
        out.validate();
        return out;
    }

    /// Wraps a matrix whose invariants the caller guarantees.
    static DensityMatrix unchecked(CMatrix rho) {
        const Eigen::Index d = rho.rows();
        detail::require(d == rho.cols() && d >= 2 && (d & (d - 1)) == 0, "density matrix must be 2^n x 2^n");
        DensityMatrix out;
        out.n_ = 0;
        while ((Eigen::Index{1} << out.n_) < d) ++out.n_;
        out.rho_ = std::move(rho);
        return out;
    }

    static DensityMatrix pure(const CVector &psi) {
        CVector v = psi / psi.norm();
        return from_matrix(v * v.adjoint());
    }

    static DensityMatrix maximally_mixed(int n) {
        const Eigen::Index d = Eigen::Index{1} << n;
        return unchecked(CMatrix::Identity(d, d) / static_cast<double>(d));
    }

    void validate() const {
        const double herm = (rho_ - rho_.adjoint()).cwiseAbs().maxCoeff();
        if (herm > kHermitianTol) throw InvalidArgument("density matrix is not Hermitian");
        if (std::abs(rho_.trace() - cplx(1, 0)) > kTraceTol) throw InvalidArgument("density matrix trace is not 1");
        const CMatrix h = 0.5 * (rho_ + rho_.adjoint());
        Eigen::SelfAdjointEigenSolver<CMatrix> es(h, Eigen::EigenvaluesOnly);
        if (es.eigenvalues().minCoeff() < -kPositivityTol) throw InvalidArgument("density matrix is not positive");
    }

    int num_qubits() const noexcept { return n_; }
    Eigen::Index dim() const noexcept { return rho_.rows(); }
    const CMatrix &matrix() const noexcept { return rho_; }

   private:
    int n_ = 0;
    CMatrix rho_;
};

/// Tr(P rho) for an arbitrary square matrix, in O(d n) without building P.
inline cplx pauli_trace(const PauliString &p, const CMatrix &rho) {
    const int n = p.num_qubits();
    const Eigen::Index d = Eigen::Index{1} << n;
    detail::require(rho.rows() == d && rho.cols() == d, "Pauli/state dimension mismatch");
    const std::uint64_t flip = p.flip_mask();
    cplx acc(0, 0);
    for (Eigen::Index r = 0; r < d; ++r) {
        cplx v(1, 0);
        for (int q = 0; q < n; ++q) {
            const Pauli letter = p.at(q);
            if (letter == Pauli::I || letter == Pauli::X) continue;
            v *= pauli_site_element(letter, static_cast<int>((r >> (n - 1 - q)) & 1));
        }
        const auto c = static_cast<Eigen::Index>(static_cast<std::uint64_t>(r) ^ flip);
        acc += v * rho(c, r);
    }
    return acc;
}

/// Re Tr(P rho). The imaginary part must vanish to 1e-9.
inline double expectation(const PauliString &p, const DensityMatrix &rho) {
    detail::require(p.num_qubits() == rho.num_qubits(), "Pauli/state dimension mismatch");
    const cplx t = pauli_trace(p, rho.matrix());
    if (std::abs(t.imag()) > 1e-9) throw NumericalError("expectation value has a non-negligible imaginary part");
    return t.real();
}

}  // namespace csst
