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
#include <Eigen/LU>
#include <array>
#include <cmath>

#include "csst/errors.hpp"

namespace csst {

namespace detail {

template <typename Mat>
double one_norm(const Mat &a) {
    return a.cwiseAbs().colwise().sum().maxCoeff();
}

// Diagonal Pade approximants r_m = (V+U)/(V-U). The coefficient tables and
// the theta_m switching thresholds are the double-precision values from the
// standard scaling-and-squaring analysis (backward error below 2^-53).
template <typename Mat, size_t K>
void pade_uv_low(const Mat &a, const std::array<double, K> &b, Mat &u, Mat &v) {
    const auto id = Mat::Identity(a.rows(), a.cols());
    const Mat a2 = a * a;
    Mat odd = b[1] * id;
    Mat even = b[0] * id;
    Mat power = id;
    for (size_t k = 2; k < K; k += 2) {
        power = power * a2;
        even += b[k] * power;
        if (k + 1 < K) odd += b[k + 1] * power;
    }
    u.noalias() = a * odd;
    v = even;
}

template <typename Mat>
void pade13_uv(const Mat &a, Mat &u, Mat &v) {
    static constexpr std::array<double, 14> b = {
        64764752532480000.0, 32382376266240000.0, 7771770303897600.0, 1187353796428800.0,
        129060195264000.0,   10559470521600.0,    670442572800.0,     33522128640.0,
        1323241920.0,        40840800.0,          960960.0,           16380.0,
        182.0,               1.0};
    const auto id = Mat::Identity(a.rows(), a.cols());
    const Mat a2 = a * a;
    const Mat a4 = a2 * a2;
    const Mat a6 = a4 * a2;
    Mat tmp = b[13] * a6 + b[11] * a4 + b[9] * a2;
    Mat inner = a6 * tmp;
    inner += b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * id;
    u.noalias() = a * inner;
    tmp = b[12] * a6 + b[10] * a4 + b[8] * a2;
    v.noalias() = a6 * tmp;
    v += b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * id;
}

}  // namespace detail

/// Matrix exponential by scaling and squaring with a diagonal Pade
/// approximant of degree 3, 5, 7, 9 or 13 chosen from the 1-norm.
template <typename Mat>
Mat matrix_exponential(const Mat &a) {
    detail::require(a.rows() == a.cols(), "matrix_exponential: matrix must be square");
    static constexpr std::array<double, 4> b3 = {120.0, 60.0, 12.0, 1.0};
    static constexpr std::array<double, 6> b5 = {30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0};
    static constexpr std::array<double, 8> b7 = {17297280.0, 8648640.0, 1995840.0, 277200.0,
                                                 25200.0,    1512.0,    56.0,      1.0};
    static constexpr std::array<double, 10> b9 = {17643225600.0, 8821612800.0, 2075673600.0, 302702400.0,
                                                  30270240.0,    2162160.0,    110880.0,     3960.0,
                                                  90.0,          1.0};
    constexpr double theta3 = 1.495585217958292e-2;
    constexpr double theta5 = 2.539398330063230e-1;
    constexpr double theta7 = 9.504178996162932e-1;
    constexpr double theta9 = 2.097847961257068e0;
    constexpr double theta13 = 5.371920351148152e0;

    const double norm = detail::one_norm(a);
    if (!std::isfinite(norm)) throw NumericalError("matrix_exponential: non-finite input");

    Mat u(a.rows(), a.cols()), v(a.rows(), a.cols());
    int squarings = 0;
    if (norm <= theta3) {
        detail::pade_uv_low(a, b3, u, v);
    } else if (norm <= theta5) {
        detail::pade_uv_low(a, b5, u, v);
    } else if (norm <= theta7) {
        detail::pade_uv_low(a, b7, u, v);
    } else if (norm <= theta9) {
        detail::pade_uv_low(a, b9, u, v);
    } else {
        squarings = std::max(0, static_cast<int>(std::ceil(std::log2(norm / theta13))));
        const Mat scaled = a * std::ldexp(1.0, -squarings);
        detail::pade13_uv(scaled, u, v);
    }

    const Mat numer = v + u;
    const Mat denom = v - u;
    Mat result = denom.partialPivLu().solve(numer);
    for (int i = 0; i < squarings; ++i) result = result * result;
    if (!result.allFinite()) throw NumericalError("matrix_exponential: non-finite result");
    return result;
}

}  // namespace csst
