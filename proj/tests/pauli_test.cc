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

#include "csst/pauli.hpp"

#include <random>
#include <set>

#include "gtest/gtest.h"

using namespace csst;

namespace {

CMatrix random_density(int n, std::mt19937_64 &gen) {
    const Eigen::Index d = Eigen::Index{1} << n;
    std::normal_distribution<double> g;
    CMatrix a(d, d);
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j) a(i, j) = cplx(g(gen), g(gen));
    CMatrix rho = a * a.adjoint();
    return rho / rho.trace();
}

}  // namespace

TEST(pauli, parse_and_weight) {
    EXPECT_EQ(PauliString::parse("IIIIII").weight(), 0);
    EXPECT_EQ(PauliString::parse("XXIIII").weight(), 2);
    EXPECT_EQ(PauliString::parse("XYZIII").weight(), 3);
    EXPECT_EQ(PauliString::parse("XYZIII").str(), "XYZIII");
    EXPECT_THROW(PauliString::parse("XQ"), InvalidArgument);

    auto p = PauliString::parse("XIZ");
    p.set(0, Pauli::I);
    p.set(1, Pauli::Y);
    EXPECT_EQ(p.str(), "IYZ");
    EXPECT_EQ(weight(p), 2);
}

TEST(pauli, enumerate_small_families) {
    auto one = enumerate_paulis(1, 1);
    ASSERT_EQ(one.size(), 3u);
    EXPECT_EQ(one[0].str(), "X");
    EXPECT_EQ(one[1].str(), "Y");
    EXPECT_EQ(one[2].str(), "Z");

    auto two = enumerate_paulis(2, 1);
    std::vector<std::string> words;
    for (const auto &p : two) words.push_back(p.str());
    EXPECT_EQ(words, (std::vector<std::string>{"XI", "YI", "ZI", "IX", "IY", "IZ"}));

    EXPECT_EQ(enumerate_paulis(6, 4).size(), 1908u);
}

TEST(pauli, enumerate_order_is_by_weight_then_sites_then_letters) {
    auto fam = enumerate_paulis(3, 2);
    ASSERT_EQ(fam.size(), 9u + 27u);
    EXPECT_EQ(fam[9].str(), "XXI");
    EXPECT_EQ(fam[10].str(), "XYI");
    EXPECT_EQ(fam[17].str(), "ZZI");
    EXPECT_EQ(fam[18].str(), "XIX");
    EXPECT_EQ(fam[35].str(), "IZZ");
    for (size_t i = 1; i < fam.size(); ++i) EXPECT_LE(fam[i - 1].weight(), fam[i].weight());
}

TEST(pauli, enumerate_count_matches_closed_form_exhaustively) {
    for (int n = 1; n <= 8; ++n) {
        for (int w = 1; w <= n; ++w) {
            auto fam = enumerate_paulis(n, w);
            ASSERT_EQ(fam.size(), pauli_family_size(n, w)) << "n=" << n << " w=" << w;
            std::set<std::string> unique;
            for (const auto &p : fam) {
                EXPECT_GE(p.weight(), 1);
                EXPECT_LE(p.weight(), w);
                unique.insert(p.str());
            }
            EXPECT_EQ(unique.size(), fam.size());
        }
    }
}

TEST(pauli, enumerate_is_deterministic) {
    auto serialize = [] {
        std::string s;
        for (const auto &p : enumerate_paulis(5, 3)) s += p.str() + "\n";
        return s;
    };
    EXPECT_EQ(serialize(), serialize());
}

TEST(pauli, enumerate_rejects_bad_weight) {
    EXPECT_THROW(enumerate_paulis(3, 4), InvalidArgument);
    EXPECT_THROW(enumerate_paulis(3, 0), InvalidArgument);
}

TEST(pauli, matrix_examples) {
    CMatrix z = pauli_matrix(PauliString::parse("Z"));
    EXPECT_EQ(z(0, 0), cplx(1, 0));
    EXPECT_EQ(z(1, 1), cplx(-1, 0));
    EXPECT_EQ(z(0, 1), cplx(0, 0));

    CMatrix xx = pauli_matrix(PauliString::parse("XX"));
    CMatrix anti = CMatrix::Zero(4, 4);
    for (int i = 0; i < 4; ++i) anti(i, 3 - i) = 1;
    EXPECT_LT((xx - anti).cwiseAbs().maxCoeff(), 1e-15);

    EXPECT_LT((pauli_matrix(PauliString(3)) - CMatrix::Identity(8, 8)).cwiseAbs().maxCoeff(), 1e-15);

    // explicit Kronecker product for a mixed word
    CMatrix y = single_qubit_pauli(Pauli::Y), x = single_qubit_pauli(Pauli::X);
    CMatrix yx(4, 4);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) yx.block(2 * i, 2 * j, 2, 2) = y(i, j) * x;
    EXPECT_LT((pauli_matrix(PauliString::parse("YX")) - yx).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(pauli, matrices_are_hermitian_involutions) {
    for (int n = 1; n <= 3; ++n) {
        for (const auto &p : enumerate_paulis(n, n)) {
            CMatrix m = pauli_matrix(p);
            const auto d = m.rows();
            EXPECT_LT((m * m - CMatrix::Identity(d, d)).cwiseAbs().maxCoeff(), 1e-12) << p.str();
            EXPECT_LT((m - m.adjoint()).cwiseAbs().maxCoeff(), 1e-12) << p.str();
        }
    }
}

TEST(pauli, matrix_respects_cap) {
    EXPECT_THROW(pauli_matrix(PauliString(9)), ResourceLimit);
    EXPECT_NO_THROW(pauli_matrix(PauliString(9), 9));
}

TEST(pauli, expectation_examples) {
    CVector zero(2), plus(2), bell = CVector::Zero(4);
    zero << 1, 0;
    plus << 1, 1;
    bell(0) = bell(3) = 1;
    EXPECT_NEAR(expectation(PauliString::parse("Z"), DensityMatrix::pure(zero)), 1.0, 1e-15);
    EXPECT_NEAR(expectation(PauliString::parse("X"), DensityMatrix::pure(plus)), 1.0, 1e-15);
    EXPECT_NEAR(expectation(PauliString::parse("ZZ"), DensityMatrix::pure(bell)), 1.0, 1e-15);
    EXPECT_NEAR(expectation(PauliString::parse("XX"), DensityMatrix::pure(bell)), 1.0, 1e-15);
    EXPECT_NEAR(expectation(PauliString::parse("YY"), DensityMatrix::pure(bell)), -1.0, 1e-15);
    EXPECT_NEAR(expectation(PauliString::parse("ZI"), DensityMatrix::pure(bell)), 0.0, 1e-15);
    EXPECT_THROW(expectation(PauliString::parse("ZZ"), DensityMatrix::pure(zero)), InvalidArgument);
}

TEST(pauli, expectation_matches_dense_trace_and_is_bounded) {
    std::mt19937_64 gen(7);
    for (int n = 1; n <= 3; ++n) {
        for (int trial = 0; trial < 5; ++trial) {
            auto rho = DensityMatrix::from_matrix(random_density(n, gen));
            for (const auto &p : enumerate_paulis(n, n)) {
                const double fast = expectation(p, rho);
                const cplx dense = (pauli_matrix(p) * rho.matrix()).trace();
                EXPECT_NEAR(fast, dense.real(), 1e-12);
                EXPECT_LE(std::abs(fast), 1 + 1e-8);
            }
        }
    }
}

TEST(pauli, density_matrix_validation) {
    CMatrix bad = CMatrix::Identity(2, 2);
    EXPECT_THROW(DensityMatrix::from_matrix(bad), InvalidArgument);  // trace 2
    CMatrix neg(2, 2);
    neg << 1.5, 0, 0, -0.5;
    EXPECT_THROW(DensityMatrix::from_matrix(neg), InvalidArgument);
    CMatrix nonherm(2, 2);
    nonherm << 0.5, 0.1, 0, 0.5;
    EXPECT_THROW(DensityMatrix::from_matrix(nonherm), InvalidArgument);
    EXPECT_NO_THROW(DensityMatrix::from_matrix(CMatrix::Identity(4, 4) / 4.0));
}
