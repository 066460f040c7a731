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

#ifndef PRIVLOC_LINALG_HPP
#define PRIVLOC_LINALG_HPP

#include <cmath>
#include <complex>
#include <stdexcept>

#include <Eigen/Dense>

namespace privloc
{

using cplx = std::complex<double>;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;
using Vec2 = Eigen::Vector2d;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kSqrt2 = 1.41421356237309504880;

// ---- symmetric vectorization ---------------------------------------------
// svec stacks the lower triangle column by column; off-diagonal entries carry
// a factor sqrt(2) so that <svec(A), svec(B)> = tr(A B).

inline constexpr int svec_size(int n) { return n * (n + 1) / 2; }

inline constexpr int svec_index(int n, int i, int j)
{
    if (i < j)
    {
        const int t = i;
        i = j;
        j = t;
    }
    return j * n - j * (j - 1) / 2 + (i - j);
}

inline int svec_order(int len)
{
    const int n = static_cast<int>(std::lround((std::sqrt(8.0 * len + 1.0) - 1.0) / 2.0));
    if (svec_size(n) != len)
        throw std::invalid_argument("svec_order: length is not triangular");
    return n;
}

template <class Derived>
Vec svec(const Eigen::MatrixBase<Derived> &a)
{
    const int n = static_cast<int>(a.rows());
    Vec v(svec_size(n));
    int k = 0;
    for (int j = 0; j < n; ++j)
    {
        v(k++) = a(j, j);
        for (int i = j + 1; i < n; ++i)
            v(k++) = kSqrt2 * 0.5 * (a(i, j) + a(j, i));
    }
    return v;
}

template <class Derived>
Mat smat(const Eigen::MatrixBase<Derived> &v)
{
    const int n = svec_order(static_cast<int>(v.size()));
    Mat a(n, n);
    int k = 0;
    for (int j = 0; j < n; ++j)
    {
        a(j, j) = v(k++);
        for (int i = j + 1; i < n; ++i)
        {
            a(i, j) = v(k++) / kSqrt2;
            a(j, i) = a(i, j);
        }
    }
    return a;
}

// ---- Hermitian parameterization ------------------------------------------
// An n x n Hermitian matrix is described by n^2 reals: the n diagonal entries
// followed by (Re, Im) of every strictly upper entry (q < r) in row order.

inline constexpr int hermitian_param_count(int n) { return n * n; }

inline CMat hermitian_from_params(const Vec &x, int n)
{
    if (x.size() != hermitian_param_count(n))
        throw std::invalid_argument("hermitian_from_params: size mismatch");
    CMat h(n, n);
    for (int q = 0; q < n; ++q)
        h(q, q) = x(q);
    int k = n;
    for (int q = 0; q < n; ++q)
        for (int r = q + 1; r < n; ++r)
        {
            h(q, r) = cplx(x(k), x(k + 1));
            h(r, q) = std::conj(h(q, r));
            k += 2;
        }
    return h;
}

inline Vec hermitian_to_params(const CMat &h)
{
    const int n = static_cast<int>(h.rows());
    Vec x(hermitian_param_count(n));
    for (int q = 0; q < n; ++q)
        x(q) = h(q, q).real();
    int k = n;
    for (int q = 0; q < n; ++q)
        for (int r = q + 1; r < n; ++r)
        {
            const cplx v = 0.5 * (h(q, r) + std::conj(h(r, q)));
            x(k) = v.real();
            x(k + 1) = v.imag();
            k += 2;
        }
    return x;
}

/// Basis matrix E_a with hermitian_from_params(e_a) == E_a.
inline CMat hermitian_basis(int n, int a)
{
    Vec e = Vec::Zero(hermitian_param_count(n));
    e(a) = 1.0;
    return hermitian_from_params(e, n);
}

template <class Derived>
double hermitian_defect(const Eigen::MatrixBase<Derived> &h)
{
    return (h - h.adjoint()).cwiseAbs().maxCoeff();
}

template <class Derived>
double symmetric_defect(const Eigen::MatrixBase<Derived> &a)
{
    return (a - a.transpose()).cwiseAbs().maxCoeff();
}

inline Mat symmetrize(const Mat &a) { return 0.5 * (a + a.transpose()); }

inline double min_eigenvalue(const Mat &a)
{
    Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(a), Eigen::EigenvaluesOnly);
    return es.eigenvalues()(0);
}

inline double min_eigenvalue(const CMat &a)
{
    const CMat h = 0.5 * (a + a.adjoint());
    Eigen::SelfAdjointEigenSolver<CMat> es(h, Eigen::EigenvaluesOnly);
    return es.eigenvalues()(0);
}

} // namespace privloc

#endif
