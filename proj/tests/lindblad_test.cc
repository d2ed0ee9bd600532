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

#include "csst/lindblad.hpp"

#include <algorithm>
#include <random>

#include "gtest/gtest.h"
#include "test_models.hpp"

using namespace csst;

namespace {

std::vector<double> sorted_real_eigenvalues(const CMatrix &h) {
    Eigen::SelfAdjointEigenSolver<CMatrix> es(h);
    std::vector<double> v(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
    std::sort(v.begin(), v.end());
    return v;
}

std::vector<cplx> sorted_eigenvalues(const CMatrix &m) {
    Eigen::ComplexEigenSolver<CMatrix> es(m, false);
    std::vector<cplx> v(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
    std::sort(v.begin(), v.end(), [](cplx a, cplx b) { return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag(); });
    return v;
}

// Right-hand side of the master equation evaluated directly on matrices.
CMatrix lindblad_rhs(const LindbladModel &m, const CMatrix &rho) {
    const cplx mi(0, -1);
    CMatrix out = mi * (m.hamiltonian * rho - rho * m.hamiltonian);
    for (const auto &j : m.jumps) {
        const CMatrix ldl = j.op.adjoint() * j.op;
        out += j.rate * (j.op * rho * j.op.adjoint() - 0.5 * (ldl * rho + rho * ldl));
    }
    return out;
}

LindbladModel single_qubit(double gamma_phi, double gamma_1) {
    LindbladModel m;
    m.n = 1;
    m.hamiltonian = CMatrix::Zero(2, 2);
    m.jumps = standard_dissipator(1, gamma_phi, gamma_1);
    return m;
}

}  // namespace

TEST(lindblad, heisenberg_lattice_terms) {
    auto h = build_heisenberg(2, 3, 1.0);
    EXPECT_EQ(h.n, 6);
    EXPECT_EQ(h.edges.size(), 7u);
    EXPECT_EQ(h.terms.size(), 21u);
    EXPECT_EQ(h.edges[0], std::make_pair(0, 1));
    EXPECT_EQ(h.edges[1], std::make_pair(0, 3));
    EXPECT_EQ(h.terms[0].pauli.str(), "XXIIII");
    EXPECT_EQ(h.terms[4].pauli.str(), "YIIYII");

    auto pair = build_heisenberg(1, 2, 1.0).matrix();
    auto ev = sorted_real_eigenvalues(pair);
    ASSERT_EQ(ev.size(), 4u);
    EXPECT_NEAR(ev[0], -3, 1e-12);
    for (int i = 1; i < 4; ++i) EXPECT_NEAR(ev[static_cast<size_t>(i)], 1, 1e-12);

    auto single = build_heisenberg(1, 1, 1.0);
    EXPECT_TRUE(single.edges.empty());
    EXPECT_LT(single.matrix().cwiseAbs().maxCoeff(), 1e-15);
}

TEST(lindblad, tfim_terms) {
    auto h = build_tfim(2, 3, 1.0, 1.0);
    int zz = 0, x = 0;
    for (const auto &t : h.terms) (t.pauli.weight() == 2 ? zz : x)++;
    EXPECT_EQ(zz, 7);
    EXPECT_EQ(x, 6);

    auto one = build_tfim(1, 1, 1.0, 1.0).matrix();
    EXPECT_LT((one - single_qubit_pauli(Pauli::X)).cwiseAbs().maxCoeff(), 1e-15);

    auto ev = sorted_real_eigenvalues(build_tfim(1, 2, 1.0, 0.0).matrix());
    EXPECT_NEAR(ev[0], -1, 1e-12);
    EXPECT_NEAR(ev[1], -1, 1e-12);
    EXPECT_NEAR(ev[2], 1, 1e-12);
    EXPECT_NEAR(ev[3], 1, 1e-12);
}

TEST(lindblad, resource_cap) {
    EXPECT_THROW(build_heisenberg(3, 3, 1.0), ResourceLimit);
    EXPECT_NO_THROW(build_heisenberg(3, 3, 1.0, ResourceCaps{9}));
}

TEST(lindblad, standard_dissipator_counts) {
    EXPECT_EQ(standard_dissipator(6, 0.1, 0.1).size(), 12u);
    EXPECT_TRUE(standard_dissipator(1, 0, 0).empty());
    auto deph = standard_dissipator(2, 0.1, 0);
    ASSERT_EQ(deph.size(), 2u);
    EXPECT_LT((deph[1].op - pauli_matrix(PauliString::parse("IZ"))).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_THROW(standard_dissipator(2, -0.1, 0), InvalidArgument);
}

TEST(lindblad, initial_states) {
    auto pm = initial_state("plus-minus-product", 2);
    EXPECT_NEAR(expectation(PauliString::parse("XI"), pm), 1, 1e-14);
    EXPECT_NEAR(expectation(PauliString::parse("IX"), pm), -1, 1e-14);

    auto ghz = initial_state("ghz", 2);
    EXPECT_NEAR(expectation(PauliString::parse("ZZ"), ghz), 1, 1e-14);
    EXPECT_NEAR(expectation(PauliString::parse("ZI"), ghz), 0, 1e-14);
    EXPECT_NEAR(std::abs((ghz.matrix() * ghz.matrix()).trace()), 1, 1e-14);  // pure

    auto zero = initial_state("computational-bitstring:0", 1);
    EXPECT_NEAR(zero.matrix()(0, 0).real(), 1, 1e-15);
    auto one_zero = initial_state("computational-bitstring:10", 2);
    EXPECT_NEAR(expectation(PauliString::parse("ZI"), one_zero), -1, 1e-15);

    EXPECT_THROW(initial_state("w-state", 2), InvalidArgument);
    EXPECT_THROW(initial_state("computational-bitstring:01", 3), InvalidArgument);
}

TEST(lindblad, vectorized_generator_matches_master_equation) {
    std::mt19937_64 gen(21);
    for (int trial = 0; trial < 5; ++trial) {
        auto model = fixtures::random_model(2, 3, gen);
        CMatrix L = vectorize_lindbladian(model);
        auto rho = fixtures::random_state(2, gen);
        CVector lhs = L * vec(rho.matrix());
        CVector rhs = vec(lindblad_rhs(model, rho.matrix()));
        EXPECT_LT((lhs - rhs).cwiseAbs().maxCoeff(), 1e-12);

        // <<I| L = 0
        CVector id = vec(CMatrix::Identity(4, 4));
        EXPECT_LT((id.adjoint() * L).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(lindblad, vectorized_generator_examples) {
    LindbladModel closed;
    closed.n = 1;
    closed.hamiltonian = CMatrix::Zero(2, 2);
    EXPECT_LT(vectorize_lindbladian(closed).cwiseAbs().maxCoeff(), 1e-15);

    auto ev = sorted_eigenvalues(vectorize_lindbladian(single_qubit(0, 1.0)));
    ASSERT_EQ(ev.size(), 4u);
    EXPECT_NEAR(std::abs(ev[0] - cplx(-1, 0)), 0, 1e-12);
    EXPECT_NEAR(std::abs(ev[1] - cplx(-0.5, 0)), 0, 1e-12);
    EXPECT_NEAR(std::abs(ev[2] - cplx(-0.5, 0)), 0, 1e-12);
    EXPECT_NEAR(std::abs(ev[3]), 0, 1e-12);
}

TEST(lindblad, closed_system_spectrum_is_imaginary) {
    std::mt19937_64 gen(4);
    auto model = fixtures::random_model(2, 0, gen);
    Eigen::ComplexEigenSolver<CMatrix> es(vectorize_lindbladian(model), false);
    EXPECT_LT(es.eigenvalues().real().cwiseAbs().maxCoeff(), 1e-9);
}

TEST(lindblad, evolve_without_dynamics_is_stationary) {
    LindbladModel closed;
    closed.n = 1;
    closed.hamiltonian = CMatrix::Zero(2, 2);
    auto rho0 = initial_state("plus-minus-product", 1);
    auto states = evolve_grid(closed, rho0, TimeGrid(10, 0.3));
    ASSERT_EQ(states.size(), 10u);
    for (const auto &s : states) EXPECT_LT((s.matrix() - rho0.matrix()).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(lindblad, dephasing_and_damping_closed_forms) {
    const double g = 0.3;
    TimeGrid grid(256, 0.05);
    auto deph = evolve_grid(single_qubit(g, 0), initial_state("plus-minus-product", 1), grid);
    auto sx = signal_matrix(deph, {PauliString::parse("X")}, grid);
    for (int j = 0; j < grid.N; ++j) EXPECT_NEAR(sx.values(0, j), std::exp(-2 * g * grid.t(j)), 1e-8);

    auto damp = evolve_grid(single_qubit(0, g), initial_state("computational-bitstring:1", 1), grid);
    auto sz = signal_matrix(damp, {PauliString::parse("Z")}, grid);
    for (int j = 0; j < grid.N; ++j) EXPECT_NEAR(sz.values(0, j), 1 - 2 * std::exp(-g * grid.t(j)), 1e-8);
}

TEST(lindblad, evolution_preserves_trace_and_hermiticity) {
    std::mt19937_64 gen(8);
    for (int trial = 0; trial < 3; ++trial) {
        auto model = fixtures::random_model(2, 2, gen);
        auto states = evolve_grid(model, fixtures::random_state(2, gen), TimeGrid(200, 0.05));
        for (const auto &s : states) {
            EXPECT_LT(std::abs(s.matrix().trace() - cplx(1, 0)), 1e-9);
            EXPECT_LT((s.matrix() - s.matrix().adjoint()).cwiseAbs().maxCoeff(), 1e-9);
        }
    }
}

TEST(lindblad, propagator_composition) {
    std::mt19937_64 gen(9);
    for (int n = 1; n <= 2; ++n) {
        CMatrix L = vectorize_lindbladian(fixtures::random_model(n, 2, gen));
        const double dt = 0.07;
        CMatrix once = matrix_exponential<CMatrix>(dt * L);
        CMatrix twice = matrix_exponential<CMatrix>(2 * dt * L);
        EXPECT_LT((once * once - twice).cwiseAbs().maxCoeff(), 1e-9);
    }
}

TEST(lindblad, signal_matrix_basics) {
    auto zero = initial_state("computational-bitstring:0", 1);
    auto s = signal_matrix({zero}, {PauliString::parse("Z")});
    ASSERT_EQ(s.rows(), 1);
    ASSERT_EQ(s.cols(), 1);
    EXPECT_NEAR(s.values(0, 0), 1, 1e-15);

    std::mt19937_64 gen(10);
    auto model = fixtures::random_model(2, 2, gen);
    TimeGrid grid(40, 0.1);
    auto states = evolve_grid(model, fixtures::random_state(2, gen), grid);
    auto full = signal_matrix(states, enumerate_paulis(2, 2), grid);
    EXPECT_EQ(full.rows(), 15);
    EXPECT_LE(full.values.cwiseAbs().maxCoeff(), 1 + 1e-6);

    EXPECT_THROW(signal_matrix({}, {PauliString::parse("Z")}), InvalidArgument);
    EXPECT_THROW(signal_matrix({zero}, {PauliString::parse("ZZ")}), InvalidArgument);
}

TEST(lindblad, modal_expansion_single_qubit_dephasing) {
    const double g = 0.25;
    CMatrix L = vectorize_lindbladian(single_qubit(g, 0));
    auto rho0 = initial_state("plus-minus-product", 1);
    auto modes = modal_expansion(L, rho0, PauliString::parse("X"));
    EXPECT_NEAR(modes.evaluate(0), 1, 1e-10);
    // only the two coherence modes carry weight, both decaying at 2 gamma
    int weighted = 0;
    cplx total = 0;
    for (Eigen::Index k = 0; k < modes.mode_weights.size(); ++k) {
        if (std::abs(modes.mode_weights(k)) > 1e-10) {
            ++weighted;
            total += modes.mode_weights(k);
            EXPECT_NEAR(std::abs(modes.eigenvalues(k) - cplx(-2 * g, 0)), 0, 1e-12);
        }
    }
    EXPECT_EQ(weighted, 2);
    EXPECT_NEAR(std::abs(total - cplx(1, 0)), 0, 1e-10);
}

TEST(lindblad, modal_expansion_matches_grid_evolution) {
    std::mt19937_64 gen(12);
    TimeGrid grid(100, 0.05);
    for (int seed = 0; seed < 5; ++seed) {
        auto model = fixtures::random_model(2, 2, gen);
        auto rho0 = fixtures::random_state(2, gen);
        CMatrix L = vectorize_lindbladian(model);
        auto states = evolve_grid(L, rho0, grid);
        for (const char *word : {"XI", "ZY", "IZ"}) {
            auto p = PauliString::parse(word);
            auto modes = modal_expansion(L, rho0, p);
            EXPECT_NEAR(modes.evaluate(0), expectation(p, rho0), 1e-8);
            for (int j = 0; j < grid.N; ++j) EXPECT_NEAR(modes.evaluate(grid.t(j)), expectation(p, states[static_cast<size_t>(j)]), 1e-7);
        }
    }
}

TEST(lindblad, modal_expansion_refuses_jordan_blocks) {
    CMatrix jordan = CMatrix::Zero(4, 4);
    for (int i = 0; i < 4; ++i) jordan(i, i) = -0.5;
    for (int i = 0; i < 3; ++i) jordan(i, i + 1) = 1.0;
    EXPECT_THROW(modal_expansion(jordan, initial_state("ghz", 1), PauliString::parse("Z")), NotDiagonalizable);
}
