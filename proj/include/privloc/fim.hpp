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

#ifndef PRIVLOC_FIM_HPP
#define PRIVLOC_FIM_HPP

#include <string>

#include "channel.hpp"

namespace privloc
{

/// Raised when the position is not identifiable from a Fisher information matrix.
class UnidentifiableError : public std::runtime_error
{
  public:
    UnidentifiableError(const std::string &block, const std::string &what)
        : std::runtime_error("unidentifiable: " + block + ": " + what), block_(block)
    {
    }
    const std::string &block() const { return block_; }

  private:
    std::string block_;
};

// ---- channel-domain FIM as a linear map of the transmit covariance ----------

/// [F_c(V)]_ij = scale * Re tr(C_ij V) with C_ij = sum_m D_i[m]^H D_j[m] and
/// scale = 2N / sigma^2. The coefficient blocks are stored in one
/// (n_params * n_tx) square matrix; block (i, j) is C_ij.
struct FimLinearMap
{
    int n_params = 0;
    int n_tx = 0;
    double scale = 0.0;
    CMat blocks;

    auto block(int i, int j) const { return blocks.block(i * n_tx, j * n_tx, n_tx, n_tx); }
};

/// Reference construction straight from the derivative matrices.
inline FimLinearMap build_fim_map(const ChannelDerivatives &derivs, const Scenario &s)
{
    const DerivedConstants dc = derive_constants(s);
    FimLinearMap map;
    map.n_params = derivs.n_params;
    map.n_tx = static_cast<int>(derivs.d.front().cols());
    map.scale = 2.0 * s.N / dc.sigma2;
    const int n_rx = static_cast<int>(derivs.d.front().rows());
    const int M = derivs.n_subcarriers;
    // stack every D_i[m] vertically over m and side by side over i: C = S^H S
    CMat stacked(static_cast<Eigen::Index>(M) * n_rx, static_cast<Eigen::Index>(map.n_params) * map.n_tx);
    for (int i = 0; i < map.n_params; ++i)
        for (int m = 1; m <= M; ++m)
            stacked.block(static_cast<Eigen::Index>(m - 1) * n_rx, i * map.n_tx, n_rx, map.n_tx) = derivs.at(i, m);
    map.blocks = stacked.adjoint() * stacked;
    return map;
}

/// Same map assembled from the rank-one factorization of every partial; O(M P^2).
inline FimLinearMap build_fim_map(const LinkParams &params, const Scenario &s)
{
    const DerivedConstants dc = derive_constants(s);
    const auto f = derivative_factors(params, s);
    FimLinearMap map;
    map.n_params = static_cast<int>(f.size());
    map.n_tx = params.n_tx;
    map.scale = 2.0 * s.N / dc.sigma2;
    map.blocks.resize(static_cast<Eigen::Index>(map.n_params) * map.n_tx,
                      static_cast<Eigen::Index>(map.n_params) * map.n_tx);
    for (int i = 0; i < map.n_params; ++i)
        for (int j = i; j < map.n_params; ++j)
        {
            const cplx w = f[i].scale.dot(f[j].scale) * f[i].rx.dot(f[j].rx); // dot conjugates the left
            const CMat cij = w * f[i].tx * f[j].tx.adjoint();
            map.blocks.block(i * map.n_tx, j * map.n_tx, map.n_tx, map.n_tx) = cij;
            if (j != i)
                map.blocks.block(j * map.n_tx, i * map.n_tx, map.n_tx, map.n_tx) = cij.adjoint();
        }
    return map;
}

/// Evaluates the channel-domain FIM at a Hermitian PSD covariance V.
inline Mat eval_channel_fim(const FimLinearMap &map, const CMat &V)
{
    if (V.rows() != map.n_tx || V.cols() != map.n_tx)
        throw std::invalid_argument("eval_channel_fim: covariance has wrong dimensions");
    const double vmax = V.cwiseAbs().maxCoeff();
    if (hermitian_defect(V) > 1e-9 * std::max(vmax, 1e-300))
        throw std::invalid_argument("eval_channel_fim: covariance is not Hermitian");
    Mat F(map.n_params, map.n_params);
    for (int i = 0; i < map.n_params; ++i)
        for (int j = 0; j < map.n_params; ++j)
            F(i, j) = map.scale * (map.block(i, j).cwiseProduct(V.transpose())).sum().real();
    return symmetrize(F);
}

// ---- location domain --------------------------------------------------------
//
// eta = [p_A (2), phi (1), p_1 .. p_K (2K), dt (1), alpha_re (K+1), alpha_im (K+1)]
// xi  = [theta_A (K+1), theta_R (K+1), tau (K+1), alpha_re (K+1), alpha_im (K+1)]

inline int location_param_count(int K) { return 4 * K + 6; }
inline int channel_param_count(int K) { return 5 * K + 5; }

/// Location-domain parameter vector of a link; gains are taken from `params`.
inline Vec location_params(const Scenario &s, Link link, const LinkParams &params)
{
    const int K = s.num_scatterers();
    Vec eta(location_param_count(K));
    eta.segment<2>(0) = s.p_A;
    eta(2) = s.orientation(link);
    for (int k = 0; k < K; ++k)
        eta.segment<2>(3 + 2 * k) = s.scatterers[k];
    eta(3 + 2 * K) = s.clock_bias(link);
    eta.segment(4 + 2 * K, K + 1) = params.alpha_re;
    eta.segment(5 + 3 * K, K + 1) = params.alpha_im;
    return eta;
}

/// The geometric map eta -> xi whose derivative is the Jacobian; gains pass through.
inline Vec channel_params_from_location(const Scenario &s, Link link, const Vec &eta)
{
    const int K = s.num_scatterers();
    if (eta.size() != location_param_count(K))
        throw std::invalid_argument("channel_params_from_location: wrong eta size");
    const Vec2 pA = eta.segment<2>(0);
    const double phi = eta(2);
    const double dt = eta(3 + 2 * K);
    const Vec2 &pR = s.receiver(link);
    Vec xi(channel_param_count(K));
    const int P = K + 1;
    xi(0) = detail::bearing(pR - pA) - phi;
    xi(P) = detail::bearing(pA - pR);
    xi(2 * P) = (pR - pA).norm() / kSpeedOfLight + dt;
    for (int k = 1; k <= K; ++k)
    {
        const Vec2 pk = eta.segment<2>(3 + 2 * (k - 1));
        xi(k) = detail::bearing(pk - pA) - phi;
        xi(P + k) = detail::bearing(pk - pR);
        xi(2 * P + k) = ((pk - pA).norm() + (pR - pk).norm()) / kSpeedOfLight + dt;
    }
    xi.segment(3 * P, P) = eta.segment(4 + 2 * K, P);
    xi.segment(4 * P, P) = eta.segment(5 + 3 * K, P);
    return xi;
}

/// Analytic Jacobian d xi / d eta, (5K+5) x (4K+6).
inline Mat build_jacobian(const Scenario &s, const LinkParams &params, Link link)
{
    const int K = s.num_scatterers();
    const int P = K + 1;
    if (params.paths() != P)
        throw std::invalid_argument("build_jacobian: parameter count does not match the scenario");
    const Vec2 &pA = s.p_A;
    const Vec2 &pR = s.receiver(link);
    auto grad_bearing = [](const Vec2 &v) {
        const double r2 = v.squaredNorm();
        if (r2 <= 1e-18)
            throw GeometryError("degenerate geometry: coincident points");
        return Vec2(-v.y() / r2, v.x() / r2);
    };
    auto unit = [](const Vec2 &v) {
        const double r = v.norm();
        if (r <= 1e-9)
            throw GeometryError("degenerate geometry: coincident points");
        return Vec2(v / r);
    };

    Mat J = Mat::Zero(channel_param_count(K), location_param_count(K));
    const int col_phi = 2;
    const int col_dt = 3 + 2 * K;
    auto col_p = [](int k) { return 3 + 2 * (k - 1); };

    // LOS
    J.block<1, 2>(0, 0) = -grad_bearing(pR - pA).transpose();
    J(0, col_phi) = -1.0;
    J.block<1, 2>(P, 0) = grad_bearing(pA - pR).transpose();
    J.block<1, 2>(2 * P, 0) = unit(pA - pR).transpose() / kSpeedOfLight;
    J(2 * P, col_dt) = 1.0;

    for (int k = 1; k <= K; ++k)
    {
        const Vec2 &pk = s.scatterers[k - 1];
        const Vec2 g = grad_bearing(pk - pA);
        J.block<1, 2>(k, 0) = -g.transpose();
        J.block<1, 2>(k, col_p(k)) = g.transpose();
        J(k, col_phi) = -1.0;
        J.block<1, 2>(P + k, col_p(k)) = grad_bearing(pk - pR).transpose();
        J.block<1, 2>(2 * P + k, 0) = unit(pA - pk).transpose() / kSpeedOfLight;
        J.block<1, 2>(2 * P + k, col_p(k)) = (unit(pk - pA) + unit(pk - pR)).transpose() / kSpeedOfLight;
        J(2 * P + k, col_dt) = 1.0;
    }
    for (int k = 0; k < P; ++k)
    {
        J(3 * P + k, 4 + 2 * K + k) = 1.0;
        J(4 * P + k, 5 + 3 * K + k) = 1.0;
    }
    return J;
}

/// Position-domain FIM and its partition around the two position coordinates.
struct PositionFim
{
    Mat F; // (4K+6) x (4K+6)
    Mat Q; // 2 x 2
    Mat G; // 2 x (4K+4)
    Mat Z; // (4K+4) x (4K+4)
};

inline PositionFim partition_position_fim(const Mat &Fp)
{
    const int n = static_cast<int>(Fp.rows());
    if (n < 3 || Fp.cols() != n)
        throw std::invalid_argument("position FIM must be square with at least 3 rows");
    PositionFim out;
    out.F = Fp;
    out.Q = Fp.topLeftCorner(2, 2);
    out.G = Fp.topRightCorner(2, n - 2);
    out.Z = Fp.bottomRightCorner(n - 2, n - 2);
    return out;
}

inline PositionFim position_fim(const Mat &Fc, const Mat &J)
{
    if (Fc.rows() != J.rows() || Fc.cols() != J.rows())
        throw std::invalid_argument("position_fim: dimension mismatch");
    return partition_position_fim(symmetrize(J.transpose() * Fc * J));
}

inline constexpr double kMaxConditionZ = 1e12;

namespace detail
{

// Jacobi-equilibrated condition number: the physical FIM mixes metres,
// radians, seconds and gain units, so raw conditioning is meaningless.
inline Vec jacobi_scaling(const Mat &A, const std::string &block)
{
    Vec d(A.rows());
    for (int i = 0; i < A.rows(); ++i)
    {
        if (!(A(i, i) > 0.0) || !std::isfinite(A(i, i)))
            throw UnidentifiableError(block, "non-positive diagonal entry " + std::to_string(i));
        d(i) = 1.0 / std::sqrt(A(i, i));
    }
    return d;
}

inline double spd_condition(const Mat &A)
{
    Eigen::SelfAdjointEigenSolver<Mat> es(A, Eigen::EigenvaluesOnly);
    const double lo = es.eigenvalues()(0);
    const double hi = es.eigenvalues()(A.rows() - 1);
    if (!(lo > 0.0))
        return std::numeric_limits<double>::infinity();
    return hi / lo;
}

} // namespace detail

/// CRB on the transmitter position through the Schur complement
/// tr((Q - G Z^{-1} G^T)^{-1}).
inline double crb_position(const PositionFim &fp)
{
    const Vec dz = detail::jacobi_scaling(fp.Z, "Z");
    const Mat Zs = dz.asDiagonal() * fp.Z * dz.asDiagonal();
    const double cz = detail::spd_condition(symmetrize(Zs));
    if (!(cz < kMaxConditionZ))
        throw UnidentifiableError("Z", "nuisance block is singular or ill-conditioned (cond " +
                                           std::to_string(cz) + ")");
    Eigen::LLT<Mat> llt(symmetrize(Zs));
    if (llt.info() != Eigen::Success)
        throw UnidentifiableError("Z", "nuisance block is not positive definite");
    const Mat Gs = fp.G * dz.asDiagonal();
    const Mat S = symmetrize(fp.Q - Gs * llt.solve(Gs.transpose()));
    const double cs = detail::spd_condition(S);
    if (!(cs < kMaxConditionZ) || !(S.trace() > 0.0))
        throw UnidentifiableError("Schur complement", "equivalent position FIM is singular");
    const double det = S(0, 0) * S(1, 1) - S(0, 1) * S(1, 0);
    if (!(det > 0.0))
        throw UnidentifiableError("Schur complement", "equivalent position FIM is not positive definite");
    return S.trace() / det; // tr of a 2x2 inverse
}

/// Reference route: tr([F^{-1}]_{1:2,1:2}) from the full inverse.
inline double crb_full_inverse(const Mat &Fp)
{
    const Vec d = detail::jacobi_scaling(Fp, "F");
    const Mat Fs = symmetrize(d.asDiagonal() * Fp * d.asDiagonal());
    Eigen::LDLT<Mat> ldlt(Fs);
    if (ldlt.info() != Eigen::Success)
        throw UnidentifiableError("F", "factorization failed");
    const Mat inv = ldlt.solve(Mat::Identity(Fs.rows(), Fs.cols()));
    return d(0) * d(0) * inv(0, 0) + d(1) * d(1) * inv(1, 1);
}

// ---- position FIM as a linear map of the covariance parameters -------------

/// F_p(V) = sum_a x_a(V) B_a where x(V) are the Hermitian parameters of V
/// (see hermitian_to_params). Column a of `coef` is svec(B_a).
struct PositionFimMap
{
    int n_eta = 0;
    int n_tx = 0;
    Mat coef;

    Mat eval(const Vec &x) const { return smat(coef * x); }
    Mat eval(const CMat &V) const { return eval(hermitian_to_params(V)); }
};

inline PositionFimMap build_position_map(const FimLinearMap &map, const Mat &J)
{
    const int n = map.n_tx;
    const int nxi = map.n_params;
    if (J.rows() != nxi)
        throw std::invalid_argument("build_position_map: Jacobian rows do not match the map");
    PositionFimMap out;
    out.n_eta = static_cast<int>(J.cols());
    out.n_tx = n;
    out.coef.resize(svec_size(out.n_eta), hermitian_param_count(n));

    // Re tr(C E_a) for the three basis kinds: diagonal, real and imaginary off-diagonal pairs
    Mat Fc(nxi, nxi);
    auto fill = [&](int a, auto &&entry) {
        for (int i = 0; i < nxi; ++i)
            for (int j = 0; j < nxi; ++j)
                Fc(i, j) = map.scale * entry(map.block(i, j));
        out.coef.col(a) = svec(Mat(J.transpose() * symmetrize(Fc) * J));
    };
    for (int q = 0; q < n; ++q)
        fill(q, [q](const auto &C) { return C(q, q).real(); });
    int a = n;
    for (int q = 0; q < n; ++q)
        for (int r = q + 1; r < n; ++r)
        {
            fill(a, [q, r](const auto &C) { return (C(r, q) + C(q, r)).real(); });
            fill(a + 1, [q, r](const auto &C) { return (C(q, r) - C(r, q)).imag(); });
            a += 2;
        }
    return out;
}

/// Everything needed to evaluate one link's information as a function of V.
struct LinkFim
{
    Link link = Link::bob;
    LinkParams params;
    FimLinearMap channel_map;
    Mat jacobian;
    PositionFimMap position_map;

    Mat position_fim_at(const CMat &V) const { return position_map.eval(V); }
    double crb_at(const CMat &V) const { return crb_position(partition_position_fim(position_fim_at(V))); }
};

inline LinkFim build_link_fim(const Scenario &s, Link link)
{
    LinkFim lf;
    lf.link = link;
    lf.params = geometry_to_params(s, link);
    lf.channel_map = build_fim_map(lf.params, s);
    lf.jacobian = build_jacobian(s, lf.params, link);
    lf.position_map = build_position_map(lf.channel_map, lf.jacobian);
    return lf;
}

} // namespace privloc

#endif
