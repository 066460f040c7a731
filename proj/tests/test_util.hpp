// SPDX-License-Identifier: Apache-2.0
//
// privloc - location-privacy aware beamforming for MIMO-OFDM positioning
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#ifndef PRIVLOC_TEST_UTIL_HPP
#define PRIVLOC_TEST_UTIL_HPP

#include <random>

#include "privloc/linalg.hpp"

namespace testutil
{

using privloc::CMat;
using privloc::Mat;

inline Mat random_matrix(std::mt19937_64 &rng, int rows, int cols)
{
    std::normal_distribution<double> n(0.0, 1.0);
    Mat a(rows, cols);
    for (int j = 0; j < cols; ++j)
        for (int i = 0; i < rows; ++i)
            a(i, j) = n(rng);
    return a;
}

inline CMat random_cmatrix(std::mt19937_64 &rng, int rows, int cols)
{
    return CMat(random_matrix(rng, rows, cols).cast<privloc::cplx>() +
                privloc::cplx(0.0, 1.0) * random_matrix(rng, rows, cols).cast<privloc::cplx>());
}

/// A A^T + shift I, positive definite for shift > 0.
inline Mat random_spd(std::mt19937_64 &rng, int n, double shift = 0.1)
{
    const Mat a = random_matrix(rng, n, n);
    return a * a.transpose() + shift * Mat::Identity(n, n);
}

/// Hermitian PSD of the given rank.
inline CMat random_hpsd(std::mt19937_64 &rng, int n, int rank)
{
    const CMat b = random_cmatrix(rng, n, rank);
    return b * b.adjoint();
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

} // namespace testutil

#endif
