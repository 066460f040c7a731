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

#include <catch2/catch_amalgamated.hpp>

#include "privloc/channel.hpp"
#include "test_util.hpp"

// Covered tests:
// - Steering vector values
// - Geometry to channel parameters at the default scenario
// - Channel matrix: single path, zero gains, direct summation oracle
// - Derivative factors vs central finite differences
// - Delay derivative grows linearly with the subcarrier index

using namespace privloc;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace
{

LinkParams from_stacked(const LinkParams &like, const Vec &xi)
{
    LinkParams p = like;
    const int P = like.paths();
    p.theta_A = xi.segment(0, P);
    p.theta_R = xi.segment(P, P);
    p.tau = xi.segment(2 * P, P);
    p.alpha_re = xi.segment(3 * P, P);
    p.alpha_im = xi.segment(4 * P, P);
    return p;
}

Scenario random_scenario(std::mt19937_64 &rng)
{
    std::uniform_real_distribution<double> u(-30.0, 30.0), y(5.0, 40.0);
    Scenario s;
    s.p_A = Vec2(u(rng) * 0.2, u(rng) * 0.2);
    s.p_B = Vec2(u(rng), y(rng));
    s.p_E = Vec2(u(rng), y(rng));
    s.scatterers = {Vec2(u(rng), y(rng)), Vec2(u(rng), y(rng)), Vec2(u(rng), y(rng))};
    s.antennas_A = 8;
    s.antennas_B = 6;
    s.antennas_E = 5;
    s.phi_B = u(rng) * 0.1;
    s.phi_E = u(rng) * 0.1;
    s.seed = rng();
    return s;
}

} // namespace

TEST_CASE("Channel - Steering vectors")
{
    const CVec a = steering(0.0, 4);
    for (int q = 0; q < 4; ++q)
        CHECK(std::abs(a(q) - cplx(1.0, 0.0)) < 1e-15);

    const CVec b = steering(kPi / 2.0, 2);
    CHECK(std::abs(b(0) - cplx(1.0, 0.0)) < 1e-15);
    CHECK(std::abs(b(1) - cplx(-1.0, 0.0)) < 1e-15);

    const CVec c = steering(kPi / 6.0, 3);
    CHECK(std::abs(c(0) - cplx(1.0, 0.0)) < 1e-15);
    CHECK(std::abs(c(1) - cplx(0.0, 1.0)) < 1e-15);
    CHECK(std::abs(c(2) - cplx(-1.0, 0.0)) < 1e-15);

    const double th = 0.37, h = 1e-6;
    const CVec fd = (steering(th + h, 16) - steering(th - h, 16)) / (2.0 * h);
    CHECK((fd - steering_derivative(th, 16)).norm() < 1e-6 * steering_derivative(th, 16).norm());
}

TEST_CASE("Channel - Geometry to parameters")
{
    const Scenario s = default_scenario();
    const LinkParams p = geometry_to_params(s, Link::bob);
    REQUIRE(p.paths() == 3);
    CHECK(p.n_tx == 16);
    CHECK(p.n_rx == 16);
    CHECK_THAT(p.tau(0), WithinRel(1.0687659998707783e-06, 1e-13));
    CHECK_THAT(std::abs(p.alpha(0)), WithinRel(4.1329327873557626e-05, 1e-12));
    CHECK_THAT(std::abs(p.alpha(1)), WithinRel(0.00018854767997037797, 1e-12));
    // LOS AOD: bearing of p_B from p_A minus the orientation
    CHECK_THAT(p.theta_A(0), WithinAbs(std::atan2(20.0, -5.0) - s.phi_B, 1e-14));
    CHECK_THAT(p.theta_R(0), WithinAbs(std::atan2(-20.0, 5.0), 1e-14));
    CHECK(p.stacked().size() == 15);

    const LinkParams e = geometry_to_params(s, Link::eve);
    CHECK_THAT(e.tau(0), WithinRel(std::hypot(4.0, 20.0) / kSpeedOfLight + s.dt_E, 1e-13));
}

TEST_CASE("Channel - Channel matrix")
{
    Scenario s = default_scenario();
    s.M = 16;
    LinkParams one;
    one.n_tx = 4;
    one.n_rx = 3;
    one.theta_A = Vec::Constant(1, 0.3);
    one.theta_R = Vec::Constant(1, -0.7);
    one.tau = Vec::Zero(1);
    one.alpha_re = Vec::Ones(1);
    one.alpha_im = Vec::Zero(1);
    const CMat ref = steering(-0.7, 3) * steering(0.3, 4).adjoint();
    for (int m = 1; m <= s.M; ++m)
        CHECK((channel_matrix(one, m, s) - ref).norm() < 1e-13);

    LinkParams zero = geometry_to_params(s, Link::bob);
    zero.alpha_re.setZero();
    zero.alpha_im.setZero();
    CHECK(channel_matrix(zero, 5, s).norm() == 0.0);
    CHECK_THROWS_AS(channel_matrix(zero, 0, s), std::out_of_range);
    CHECK_THROWS_AS(channel_matrix(zero, s.M + 1, s), std::out_of_range);

    // direct entrywise summation with exp() written out
    const Scenario d = default_scenario();
    const LinkParams p = geometry_to_params(d, Link::bob);
    const double df = d.bandwidth / d.M;
    for (int m : {1, 333, 1024})
    {
        const CMat H = channel_matrix(p, m, d);
        double worst = 0.0;
        for (int r = 0; r < p.n_rx; ++r)
            for (int t = 0; t < p.n_tx; ++t)
            {
                std::complex<double> acc = 0.0;
                for (int k = 0; k < p.paths(); ++k)
                {
                    const double phase = -2.0 * kPi * m * df * p.tau(k) + kPi * r * std::sin(p.theta_R(k)) -
                                         kPi * t * std::sin(p.theta_A(k));
                    acc += std::complex<double>(p.alpha_re(k), p.alpha_im(k)) * std::exp(std::complex<double>(0.0, phase));
                }
                worst = std::max(worst, std::abs(acc - H(r, t)) / std::abs(acc));
            }
        CHECK(worst < 1e-9);
        CHECK((channel_matrix(p, m, d) - H).norm() == 0.0);
    }
}

TEST_CASE("Channel - Derivatives vs finite differences")
{
    std::mt19937_64 rng(20261018);
    std::vector<Scenario> cases{default_scenario(), random_scenario(rng)};
    for (const Scenario &s : cases)
    {
        const LinkParams p = geometry_to_params(s, Link::bob);
        const ChannelDerivatives cd = channel_derivatives(p, s);
        const Vec xi = p.stacked();
        const int P = p.paths();
        REQUIRE(cd.n_params == 5 * P);
        for (int i = 0; i < cd.n_params; ++i)
        {
            const double h = (i >= 2 * P && i < 3 * P) ? 1e-12 : 1e-6;
            Vec xp = xi, xm = xi;
            xp(i) += h;
            xm(i) -= h;
            const LinkParams pp = from_stacked(p, xp), pm = from_stacked(p, xm);
            double worst = 0.0;
            for (int m : {1, 77, s.M / 2, s.M})
            {
                const CMat fd = (channel_matrix(pp, m, s) - channel_matrix(pm, m, s)) / (2.0 * h);
                const CMat an = cd.at(i, m);
                worst = std::max(worst, (fd - an).norm() / an.norm());
            }
            INFO("parameter " << i);
            CHECK(worst < 1e-6);
        }
    }
}

TEST_CASE("Channel - Gain and delay derivative structure")
{
    Scenario s = default_scenario();
    s.M = 64;
    LinkParams p = geometry_to_params(s, Link::bob);
    p.alpha_re.setZero();
    p.alpha_im.setZero();
    const ChannelDerivatives cd = channel_derivatives(p, s);
    const int P = p.paths();
    const double df = s.bandwidth / s.M;
    for (int k = 0; k < P; ++k)
        for (int m : {1, 10, 64})
        {
            const CMat ref = std::polar(1.0, -2.0 * kPi * m * df * p.tau(k)) * steering(p.theta_R(k), p.n_rx) *
                             steering(p.theta_A(k), p.n_tx).adjoint();
            CHECK((cd.at(3 * P + k, m) - ref).norm() < 1e-12);
        }

    const LinkParams q = geometry_to_params(s, Link::bob);
    const ChannelDerivatives cq = channel_derivatives(q, s);
    const double n1 = cq.at(2 * P, 1).norm();
    for (int m : {2, 7, 64})
        CHECK_THAT(cq.at(2 * P, m).norm(), WithinRel(m * n1, 1e-12));
}
