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

#ifndef PRIVLOC_CHANNEL_HPP
#define PRIVLOC_CHANNEL_HPP

#include <vector>

#include "scenario.hpp"

namespace privloc
{

// Half-wavelength uniform linear array: element q has phase pi * q * sin(theta).

inline CVec steering(double theta, int n_antennas)
{
    CVec a(n_antennas);
    const double u = kPi * std::sin(theta);
    for (int q = 0; q < n_antennas; ++q)
        a(q) = std::polar(1.0, u * q);
    return a;
}

/// d/dtheta of steering(theta, n).
inline CVec steering_derivative(double theta, int n_antennas)
{
    CVec a = steering(theta, n_antennas);
    const double c = kPi * std::cos(theta);
    for (int q = 0; q < n_antennas; ++q)
        a(q) *= cplx(0.0, c * q);
    return a;
}

/// Channel-domain parameters of one link; entry 0 of every array is the LOS path.
struct LinkParams
{
    Vec theta_A; // AODs at the transmitter, rad
    Vec theta_R; // AOAs at the receiver, rad
    Vec tau;     // delays including the clock bias, s
    Vec alpha_re;
    Vec alpha_im;
    int n_rx = 0; // receiver antennas
    int n_tx = 0; // transmitter antennas

    int paths() const { return static_cast<int>(tau.size()); }
    int size() const { return 5 * paths(); }
    cplx alpha(int k) const { return {alpha_re(k), alpha_im(k)}; }

    /// Stacked vector [theta_A; theta_R; tau; alpha_re; alpha_im].
    Vec stacked() const
    {
        const int n = paths();
        Vec xi(5 * n);
        xi << theta_A, theta_R, tau, alpha_re, alpha_im;
        return xi;
    }
};

/// Parameter kinds in the stacked order; index of (kind, path) is kind * (K+1) + path.
enum class ParamKind
{
    aod = 0,
    aoa = 1,
    delay = 2,
    gain_re = 3,
    gain_im = 4
};

namespace detail
{

inline double bearing(const Vec2 &v) { return std::atan2(v.y(), v.x()); }

} // namespace detail

/// Maps the scenario geometry to channel-domain parameters. Receivers have
/// orientation 0 in the global frame; the transmitter orientation of the link
/// (phi_B or phi_E) is subtracted from every AOD.
inline LinkParams geometry_to_params(const Scenario &s, Link link)
{
    validate(s);
    const DerivedConstants dc = derive_constants(s);
    const Vec2 &pR = s.receiver(link);
    const double phi = s.orientation(link);
    const double dt = s.clock_bias(link);
    const int K = s.num_scatterers();
    const std::vector<double> omega = draw_path_phases(s, link);

    LinkParams p;
    p.n_rx = s.receiver_antennas(link);
    p.n_tx = s.antennas_A;
    p.theta_A.resize(K + 1);
    p.theta_R.resize(K + 1);
    p.tau.resize(K + 1);
    p.alpha_re.resize(K + 1);
    p.alpha_im.resize(K + 1);

    const double d0 = (pR - s.p_A).norm();
    p.theta_A(0) = detail::bearing(pR - s.p_A) - phi;
    p.theta_R(0) = detail::bearing(s.p_A - pR);
    p.tau(0) = d0 / kSpeedOfLight + dt;
    const cplx a0 = std::polar(dc.lambda / (4.0 * kPi * d0), omega[0]);
    p.alpha_re(0) = a0.real();
    p.alpha_im(0) = a0.imag();

    const double four_pi_32 = std::pow(4.0 * kPi, 1.5);
    for (int k = 1; k <= K; ++k)
    {
        const Vec2 &pk = s.scatterers[k - 1];
        const double d1 = (pk - s.p_A).norm();
        const double d2 = (pR - pk).norm();
        p.theta_A(k) = detail::bearing(pk - s.p_A) - phi;
        p.theta_R(k) = detail::bearing(pk - pR);
        p.tau(k) = (d1 + d2) / kSpeedOfLight + dt;
        const cplx ak = std::polar(s.sigma_rcs * dc.lambda / (four_pi_32 * d1 * d2), omega[k]);
        p.alpha_re(k) = ak.real();
        p.alpha_im(k) = ak.imag();
    }
    return p;
}

/// H[m] = sum_k alpha_k exp(-j 2 pi m df tau_k) a_R(theta_R,k) a_A(theta_A,k)^H, m = 1..M.
inline CMat channel_matrix(const LinkParams &params, int m, const Scenario &s)
{
    if (m < 1 || m > s.M)
        throw std::out_of_range("channel_matrix: subcarrier index out of range");
    const double df = derive_constants(s).delta_f;
    CMat h = CMat::Zero(params.n_rx, params.n_tx);
    for (int k = 0; k < params.paths(); ++k)
    {
        const cplx g = params.alpha(k) * std::polar(1.0, -2.0 * kPi * m * df * params.tau(k));
        h.noalias() += g * steering(params.theta_R(k), params.n_rx) *
                       steering(params.theta_A(k), params.n_tx).adjoint();
    }
    return h;
}

/// A single dH[m]/dxi_i factored as scale_i(m) * rx * tx^H. Every partial of the
/// multipath model has this rank-one form.
struct RankOneDerivative
{
    CVec rx;
    CVec tx;
    Eigen::VectorXcd scale; // one entry per subcarrier, m = 1..M
};

/// Rank-one factors of all 5(K+1) partial derivatives in stacked parameter order.
inline std::vector<RankOneDerivative> derivative_factors(const LinkParams &params, const Scenario &s)
{
    const double df = derive_constants(s).delta_f;
    const int P = params.paths();
    std::vector<RankOneDerivative> out(5 * P);
    for (int k = 0; k < P; ++k)
    {
        const CVec aR = steering(params.theta_R(k), params.n_rx);
        const CVec aA = steering(params.theta_A(k), params.n_tx);
        const cplx alpha = params.alpha(k);
        Eigen::VectorXcd ph(s.M), ramp(s.M);
        for (int m = 1; m <= s.M; ++m)
        {
            ph(m - 1) = std::polar(1.0, -2.0 * kPi * m * df * params.tau(k));
            ramp(m - 1) = cplx(0.0, -2.0 * kPi * m * df);
        }
        out[0 * P + k] = {aR, steering_derivative(params.theta_A(k), params.n_tx), alpha * ph};
        out[1 * P + k] = {steering_derivative(params.theta_R(k), params.n_rx), aA, alpha * ph};
        out[2 * P + k] = {aR, aA, (alpha * ph.array() * ramp.array()).matrix()};
        out[3 * P + k] = {aR, aA, ph};
        out[4 * P + k] = {aR, aA, cplx(0.0, 1.0) * ph};
    }
    return out;
}

/// Full derivative matrices D_i[m] = dH[m]/dxi_i.
struct ChannelDerivatives
{
    int n_params = 0;
    int n_subcarriers = 0;
    std::vector<CMat> d; // index i * n_subcarriers + (m - 1)

    const CMat &at(int i, int m) const { return d[static_cast<std::size_t>(i) * n_subcarriers + (m - 1)]; }
};

inline ChannelDerivatives channel_derivatives(const LinkParams &params, const Scenario &s)
{
    const auto factors = derivative_factors(params, s);
    ChannelDerivatives cd;
    cd.n_params = static_cast<int>(factors.size());
    cd.n_subcarriers = s.M;
    cd.d.reserve(factors.size() * s.M);
    for (const auto &f : factors)
    {
        const CMat outer = f.rx * f.tx.adjoint();
        for (int m = 0; m < s.M; ++m)
            cd.d.push_back(f.scale(m) * outer);
    }
    return cd;
}

} // namespace privloc

#endif
