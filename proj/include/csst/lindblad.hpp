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
#include <Eigen/SVD>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "csst/errors.hpp"
#include "csst/expm.hpp"
#include "csst/pauli.hpp"

namespace csst {

using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;

/// Dense superoperators are d^2 x d^2; 6 qubits (4096 x 4096) is the default ceiling.
struct ResourceCaps {
    int max_qubits = 6;
};

/// Uniform grid t_j = j * dt, j = 0..N-1.
struct TimeGrid {
    int N = 1;
    double dt = 1.0;

    TimeGrid() = default;
    TimeGrid(int n, double step) : N(n), dt(step) {
        detail::require(N >= 1, "TimeGrid: N must be >= 1");
        detail::require(dt > 0 && std::isfinite(dt), "TimeGrid: dt must be positive");
    }
    double t(int j) const noexcept { return j * dt; }
};

inline CMatrix kron(const CMatrix &a, const CMatrix &b) {
    CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
        }
    }
    return out;
}

/// op acting on `site` of an n-qubit register (site 0 most significant).
inline CMatrix embed_site(const CMatrix &op, int site, int n) {
    detail::require(op.rows() == 2 && op.cols() == 2, "embed_site: expected a 2x2 operator");
    detail::require(site >= 0 && site < n, "embed_site: site out of range");
    const Eigen::Index left = Eigen::Index{1} << site;
    const Eigen::Index right = Eigen::Index{1} << (n - site - 1);
    return kron(kron(CMatrix::Identity(left, left), op), CMatrix::Identity(right, right));
}

inline void check_qubits(int n, const ResourceCaps &caps) {
    detail::require(n >= 1, "qubit count must be >= 1");
    if (n > caps.max_qubits) {
        throw ResourceLimit("n=" + std::to_string(n) + " exceeds the dense-simulation cap of " +
                            std::to_string(caps.max_qubits) + " qubits");
    }
}

struct PauliTerm {
    double coeff = 0;
    PauliString pauli;
};

/// Spin Hamiltonian as a sum of Pauli terms on a rectangular lattice.
struct SpinHamiltonian {
    int n = 0;
    std::vector<std::pair<int, int>> edges;
    std::vector<PauliTerm> terms;

    CMatrix matrix() const {
        const Eigen::Index d = Eigen::Index{1} << n;
        CMatrix h = CMatrix::Zero(d, d);
        for (const auto &t : terms) h += t.coeff * pauli_matrix(t.pauli, n);
        return h;
    }
};

/// Nearest-neighbour edges of an open rows x cols grid, row-major sites.
inline std::vector<std::pair<int, int>> lattice_edges(int rows, int cols) {
    detail::require(rows >= 1 && cols >= 1, "lattice dimensions must be positive");
    std::vector<std::pair<int, int>> edges;
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            const int a = r * cols + c;
            if (c + 1 < cols) edges.emplace_back(a, a + 1);
            if (r + 1 < rows) edges.emplace_back(a, a + cols);
        }
    }
    return edges;
}

namespace detail {

inline PauliString two_site(int n, int a, Pauli pa, int b, Pauli pb) {
    PauliString p(n);
    p.set(a, pa);
    p.set(b, pb);
    return p;
}

}  // namespace detail

/// H = J sum_<a,b> (X_a X_b + Y_a Y_b + Z_a Z_b).
inline SpinHamiltonian build_heisenberg(int rows, int cols, double J, const ResourceCaps &caps = {}) {
    detail::require(rows >= 1 && cols >= 1, "lattice dimensions must be positive");
    SpinHamiltonian h;
    h.n = rows * cols;
    check_qubits(h.n, caps);
    h.edges = lattice_edges(rows, cols);
    for (auto [a, b] : h.edges) {
        for (Pauli p : {Pauli::X, Pauli::Y, Pauli::Z}) h.terms.push_back({J, detail::two_site(h.n, a, p, b, p)});
    }
    return h;
}

/// H = J sum_<a,b> Z_a Z_b + h sum_a X_a.
inline SpinHamiltonian build_tfim(int rows, int cols, double J, double field, const ResourceCaps &caps = {}) {
    detail::require(rows >= 1 && cols >= 1, "lattice dimensions must be positive");
    SpinHamiltonian h;
    h.n = rows * cols;
    check_qubits(h.n, caps);
    h.edges = lattice_edges(rows, cols);
    for (auto [a, b] : h.edges) h.terms.push_back({J, detail::two_site(h.n, a, Pauli::Z, b, Pauli::Z)});
    for (int a = 0; a < h.n; ++a) {
        PauliString x(h.n);
        x.set(a, Pauli::X);
        h.terms.push_back({field, x});
    }
    return h;
}

struct JumpOperator {
    CMatrix op;
    double rate = 0;
    std::string label;
};

/// Hamiltonian plus jump operators; generator of rho(t).
struct LindbladModel {
    int n = 0;
    CMatrix hamiltonian;
    std::vector<JumpOperator> jumps;

    void validate() const {
        const Eigen::Index d = Eigen::Index{1} << n;
        detail::require(hamiltonian.rows() == d && hamiltonian.cols() == d, "Hamiltonian has wrong dimension");
        detail::require((hamiltonian - hamiltonian.adjoint()).cwiseAbs().maxCoeff() <= 1e-10,
                        "Hamiltonian is not Hermitian");
        for (const auto &j : jumps) {
            detail::require(j.op.rows() == d && j.op.cols() == d, "jump operator has wrong dimension");
            detail::require(j.rate >= 0 && std::isfinite(j.rate), "jump rates must be nonnegative");
        }
    }
};

inline CMatrix sigma_minus() {
    CMatrix m = CMatrix::Zero(2, 2);
    m(0, 1) = 1.0;  // |0><1|
    return m;
}

/// Z_q with rate gamma_phi and sigma^-_q with rate gamma_1 on every site.
/// Zero-rate channels are omitted.
inline std::vector<JumpOperator> standard_dissipator(int n, double gamma_phi, double gamma_1) {
    detail::require(n >= 1, "qubit count must be >= 1");
    detail::require(gamma_phi >= 0 && gamma_1 >= 0, "dissipation rates must be nonnegative");
    std::vector<JumpOperator> jumps;
    for (int q = 0; q < n; ++q) {
        if (gamma_phi > 0) {
            jumps.push_back({embed_site(single_qubit_pauli(Pauli::Z), q, n), gamma_phi, "Z_" + std::to_string(q)});
        }
        if (gamma_1 > 0) {
            jumps.push_back({embed_site(sigma_minus(), q, n), gamma_1, "sm_" + std::to_string(q)});
        }
    }
    return jumps;
}

enum class InitialStateKind { PlusMinusProduct, Ghz, ComputationalBitstring };

struct InitialStateSpec {
    InitialStateKind kind = InitialStateKind::PlusMinusProduct;
    std::string bits;  // only for ComputationalBitstring

    /// "plus-minus-product", "ghz" or "computational-bitstring:0101".
    static InitialStateSpec parse(const std::string &s) {
        if (s == "plus-minus-product") return {InitialStateKind::PlusMinusProduct, {}};
        if (s == "ghz") return {InitialStateKind::Ghz, {}};
        const std::string prefix = "computational-bitstring:";
        if (s.rfind(prefix, 0) == 0) return {InitialStateKind::ComputationalBitstring, s.substr(prefix.size())};
        throw InvalidArgument("unknown initial state kind \"" + s + "\"");
    }

    std::string str() const {
        switch (kind) {
            case InitialStateKind::PlusMinusProduct: return "plus-minus-product";
            case InitialStateKind::Ghz: return "ghz";
            case InitialStateKind::ComputationalBitstring: return "computational-bitstring:" + bits;
        }
        return {};
    }
};

/// Pure initial state. |+-+-...> starts with |+> on site 0; GHZ uses 1/sqrt(2).
inline DensityMatrix initial_state(const InitialStateSpec &spec, int n) {
    detail::require(n >= 1 && n <= PauliString::kMaxQubits, "qubit count must be >= 1");
    const Eigen::Index d = Eigen::Index{1} << n;
    CVector psi = CVector::Zero(d);
    switch (spec.kind) {
        case InitialStateKind::PlusMinusProduct: {
            const double amp = std::pow(2.0, -0.5 * n);
            for (Eigen::Index b = 0; b < d; ++b) {
                int sign_flips = 0;
                for (int q = 1; q < n; q += 2) sign_flips += static_cast<int>((b >> (n - 1 - q)) & 1);
                psi(b) = (sign_flips % 2 == 0) ? amp : -amp;
            }
            break;
        }
        case InitialStateKind::Ghz:
            psi(0) = psi(d - 1) = 1.0 / std::sqrt(2.0);
            break;
        case InitialStateKind::ComputationalBitstring: {
            detail::require(static_cast<int>(spec.bits.size()) == n, "bitstring length must equal n");
            Eigen::Index idx = 0;
            for (char c : spec.bits) {
                detail::require(c == '0' || c == '1', "bitstring must contain only 0 and 1");
                idx = (idx << 1) | (c == '1' ? 1 : 0);
            }
            psi(idx) = 1.0;
            break;
        }
    }
    return DensityMatrix::pure(psi);
}

inline DensityMatrix initial_state(const std::string &kind, int n) { return initial_state(InitialStateSpec::parse(kind), n); }

/// Column-stacking vectorization: vec(rho) stacks columns, so
/// vec(A X B) = (B^T kron A) vec(X).
inline CVector vec(const CMatrix &m) { return Eigen::Map<const CVector>(m.data(), m.size()); }

inline CMatrix unvec(const CVector &v, Eigen::Index d) { return Eigen::Map<const CMatrix>(v.data(), d, d); }

/// L = -i(I(x)H - H^T(x)I) + sum_k g_k (L_k^* (x) L_k - 1/2 I(x)L_k^+L_k - 1/2 (L_k^+L_k)^T (x) I).
inline CMatrix vectorize_lindbladian(const LindbladModel &model, const ResourceCaps &caps = {}) {
    check_qubits(model.n, caps);
    model.validate();
    const Eigen::Index d = Eigen::Index{1} << model.n;
    const CMatrix id = CMatrix::Identity(d, d);
    const cplx minus_i(0, -1);
    CMatrix L = minus_i * (kron(id, model.hamiltonian) - kron(model.hamiltonian.transpose(), id));
    for (const auto &j : model.jumps) {
        if (j.rate == 0) continue;
        const CMatrix ldl = j.op.adjoint() * j.op;
        L += j.rate * (kron(j.op.conjugate(), j.op) - 0.5 * kron(id, ldl) - 0.5 * kron(ldl.transpose(), id));
    }
    return L;
}

/// rho(t_j) for every grid point: one exp(dt L) then repeated application.
inline std::vector<DensityMatrix> evolve_grid(const CMatrix &L, const DensityMatrix &rho0, const TimeGrid &grid) {
    const Eigen::Index d = rho0.dim();
    detail::require(L.rows() == d * d && L.cols() == d * d, "evolve_grid: generator/state dimension mismatch");
    const CMatrix step = matrix_exponential<CMatrix>(grid.dt * L);
    std::vector<DensityMatrix> states;
    states.reserve(static_cast<size_t>(grid.N));
    states.push_back(rho0);
    CVector v = vec(rho0.matrix());
    for (int j = 1; j < grid.N; ++j) {
        v = step * v;
        CMatrix rho = unvec(v, d);
        try {
            states.push_back(DensityMatrix::from_matrix(std::move(rho)));
        } catch (const InvalidArgument &e) {
            throw NumericalError(std::string("evolve_grid: state invariant violated at step ") + std::to_string(j) +
                                 ": " + e.what());
        }
    }
    return states;
}

inline std::vector<DensityMatrix> evolve_grid(const LindbladModel &model, const DensityMatrix &rho0,
                                              const TimeGrid &grid, const ResourceCaps &caps = {}) {
    detail::require(model.n == rho0.num_qubits(), "evolve_grid: model/state qubit mismatch");
    return evolve_grid(vectorize_lindbladian(model, caps), rho0, grid);
}

/// S_ij = Tr(O_i rho(t_j)).
struct SignalMatrix {
    RMatrix values;
    std::vector<PauliString> observables;
    TimeGrid grid;

    Eigen::Index rows() const noexcept { return values.rows(); }
    Eigen::Index cols() const noexcept { return values.cols(); }
    RVector row(Eigen::Index i) const { return values.row(i).transpose(); }
};

inline SignalMatrix signal_matrix(const std::vector<DensityMatrix> &states, const std::vector<PauliString> &observables,
                                  const TimeGrid &grid) {
    detail::require(!states.empty() && !observables.empty(), "signal_matrix: empty input");
    detail::require(static_cast<int>(states.size()) == grid.N, "signal_matrix: state count must equal grid N");
    SignalMatrix s;
    s.observables = observables;
    s.grid = grid;
    s.values.resize(static_cast<Eigen::Index>(observables.size()), static_cast<Eigen::Index>(states.size()));
    for (size_t i = 0; i < observables.size(); ++i) {
        for (size_t j = 0; j < states.size(); ++j) {
            s.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = expectation(observables[i], states[j]);
        }
    }
    return s;
}

inline SignalMatrix signal_matrix(const std::vector<DensityMatrix> &states, const std::vector<PauliString> &observables) {
    return signal_matrix(states, observables, TimeGrid(static_cast<int>(states.size()), 1.0));
}

/// s_O(t) = sum_k e^{lambda_k t} a_k b_k over the eigenmodes of L.
struct ModalDecomposition {
    CVector eigenvalues;
    CVector mode_weights;
    double condition = 0;

    double evaluate(double t) const {
        cplx acc(0, 0);
        for (Eigen::Index k = 0; k < eigenvalues.size(); ++k) acc += std::exp(eigenvalues(k) * t) * mode_weights(k);
        return acc.real();
    }
};

/// Refuses generators whose eigenvector matrix has condition number above
/// `kappa_cap`; grid evolution stays available for those.
inline ModalDecomposition modal_expansion(const CMatrix &L, const DensityMatrix &rho0, const PauliString &obs,
                                          double kappa_cap = 1e8) {
    const Eigen::Index d = rho0.dim();
    detail::require(L.rows() == d * d && L.cols() == d * d, "modal_expansion: generator/state dimension mismatch");
    detail::require(obs.num_qubits() == rho0.num_qubits(), "modal_expansion: observable/state mismatch");

    Eigen::ComplexEigenSolver<CMatrix> es(L, true);
    if (es.info() != Eigen::Success) throw NumericalError("modal_expansion: eigendecomposition failed");
    const CMatrix &right = es.eigenvectors();

    Eigen::JacobiSVD<CMatrix> svd(right);
    const auto &sv = svd.singularValues();
    const double smin = sv(sv.size() - 1);
    const double kappa = smin > 0 ? sv(0) / smin : std::numeric_limits<double>::infinity();
    if (!(kappa <= kappa_cap)) {
        throw NotDiagonalizable("modal_expansion: eigenvector condition number " + std::to_string(kappa) +
                                " exceeds cap");
    }

    ModalDecomposition out;
    out.eigenvalues = es.eigenvalues();
    out.condition = kappa;
    for (Eigen::Index k = 0; k < out.eigenvalues.size(); ++k) {
        if (out.eigenvalues(k).real() > 1e-8) throw NumericalError("modal_expansion: eigenvalue with positive real part");
    }

    const CVector o = vec(pauli_matrix(obs));
    const CVector a = right.adjoint() * o;                                    // <<O|r_k>> = conj(r_k^H o)
    const CVector b = right.partialPivLu().solve(vec(rho0.matrix()));          // <<l_k|rho0>>
    out.mode_weights = a.conjugate().cwiseProduct(b);
    return out;
}

}  // namespace csst
