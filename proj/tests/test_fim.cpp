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

#include "privloc/fim.hpp"
#include "test_util.hpp"

// Covered tests:
// - Channel FIM map: linearity, slot-sum oracle, two assembly routes agree
// - Channel FIM is PSD and scales with N
// - Jacobian vs finite differences of the geometry
// - Position FIM congruence and PSD preservation
// - CRB through the Schur complement vs the full inverse
// - Position FIM linear map vs direct evaluation
// - Unidentifiable inputs

using namespace privloc;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace
{

Scenario small_scenario()
{
    Scenario s;
    s.M = 8;
    s.N = 2;
    s.L = 1;
    return s;
}

double max_rel(const Mat &a, const Mat &b) { return (a - b).norm() / b.norm(); }

} // namespace

TEST_CASE("FIM - Channel map linearity and slot-sum oracle")
{
    const Scenario s = small_scenario();
    const LinkParams p = geometry_to_params(s, Link::bob);
    const FimLinearMap map = build_fim_map(channel_derivatives(p, s), s);
    const int n = p.n_tx;

    CHECK(eval_channel_fim(map, CMat::Zero(n, n)).norm() == 0.0);

    std::mt19937_64 rng(11);
    const CMat V = testutil::random_hpsd(rng, n, 3);
    CHECK(max_rel(eval_channel_fim(map, 2.5 * V), 2.5 * eval_channel_fim(map, V)) < 1e-13);

    // sum over slots, symbols and subcarriers of Re{dmu_i^H dmu_j} with x = w s[n,m]
    const CVec w = testutil::random_cmatrix(rng, n, 1).col(0);
    const CMat Vw = w * w.adjoint();
    const ChannelDerivatives cd = channel_derivatives(p, s);
    const double sigma2 = derive_constants(s).sigma2;
    std::uniform_real_distribution<double> ph(0.0, 2.0 * kPi);
    Mat brute = Mat::Zero(cd.n_params, cd.n_params);
    for (int l = 0; l < s.L; ++l)
        for (int sym = 0; sym < s.N; ++sym)
            for (int m = 1; m <= s.M; ++m)
            {
                const cplx pilot = std::polar(1.0, ph(rng));
                for (int i = 0; i < cd.n_params; ++i)
                    for (int j = 0; j < cd.n_params; ++j)
                    {
                        const CVec di = cd.at(i, m) * w * pilot;
                        const CVec dj = cd.at(j, m) * w * pilot;
                        brute(i, j) += 2.0 / sigma2 * di.dot(dj).real();
                    }
            }
    CHECK(max_rel(eval_channel_fim(map, Vw), brute) < 1e-9);
}

TEST_CASE("FIM - Rank-one assembly matches derivative matrices")
{
    Scenario s = default_scenario();
    s.M = 64;
    for (Link link : {Link::bob, Link::eve})
    {
        const LinkParams p = geometry_to_params(s, link);
        const FimLinearMap a = build_fim_map(channel_derivatives(p, s), s);
        const FimLinearMap b = build_fim_map(p, s);
        CHECK((a.blocks - b.blocks).norm() < 1e-10 * a.blocks.norm());
        CHECK(a.scale == b.scale);
    }
}

TEST_CASE("FIM - Channel FIM is PSD and scales with N")
{
    Scenario s = default_scenario();
    s.M = 32;
    const LinkParams p = geometry_to_params(s, Link::bob);
    const FimLinearMap map = build_fim_map(p, s);
    const double cap = derive_constants(s).power_cap;
    const Mat F0 = eval_channel_fim(map, CMat::Identity(16, 16) * (cap / 16.0));
    CHECK(min_eigenvalue(F0) >= -1e-10 * F0.norm());
    CHECK(F0.diagonal().minCoeff() >= 0.0);

    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 20; ++trial)
    {
        const CMat V = testutil::random_hpsd(rng, 16, 1 + trial % 16);
        const Mat F = eval_channel_fim(map, V);
        CHECK(min_eigenvalue(F) >= -1e-10 * F.norm());
    }

    Scenario s2 = s;
    s2.N = 2 * s.N;
    const Mat F2 = eval_channel_fim(build_fim_map(p, s2), CMat::Identity(16, 16) * (cap / 16.0));
    CHECK(max_rel(F2, 2.0 * F0) < 1e-14);

    CHECK_THROWS_AS(eval_channel_fim(map, CMat::Identity(3, 3)), std::invalid_argument);
    CMat notH = CMat::Identity(16, 16);
    notH(0, 1) = 1.0;
    CHECK_THROWS_AS(eval_channel_fim(map, notH), std::invalid_argument);
}

TEST_CASE("FIM - Jacobian vs geometry finite differences")
{
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<Scenario> cases{default_scenario()};
    for (int c = 0; c < 2; ++c)
    {
        Scenario s;
        s.p_A = Vec2(3.0 * u(rng), 3.0 * u(rng));
        s.p_B = Vec2(20.0 * u(rng), 25.0 + 5.0 * u(rng));
        s.p_E = Vec2(20.0 * u(rng), 25.0 + 5.0 * u(rng));
        s.scatterers = {Vec2(15.0 * u(rng), 12.0 + 3.0 * u(rng)), Vec2(15.0 * u(rng), 12.0 + 3.0 * u(rng))};
        s.phi_B = u(rng);
        s.phi_E = u(rng);
        cases.push_back(s);
    }

    for (const Scenario &s : cases)
        for (Link link : {Link::bob, Link::eve})
        {
            const LinkParams p = geometry_to_params(s, link);
            const Mat J = build_jacobian(s, p, link);
            const int K = s.num_scatterers();
            const int P = K + 1;
            REQUIRE(J.rows() == 5 * K + 5);
            REQUIRE(J.cols() == 4 * K + 6);

            // perturb the scenario itself; the gain rows are identity and checked separately
            auto geom = [&](const Scenario &t) {
                const LinkParams q = geometry_to_params(t, link);
                Vec v(3 * P);
                v << q.theta_A, q.theta_R, q.tau;
                return v;
            };
            auto perturbed = [&](int col, double h) {
                Scenario t = s;
                if (col < 2)
                    t.p_A(col) += h;
                else if (col == 2)
                    (link == Link::bob ? t.phi_B : t.phi_E) += h;
                else if (col < 3 + 2 * K)
                    t.scatterers[(col - 3) / 2]((col - 3) % 2) += h;
                else
                    (link == Link::bob ? t.dt_B : t.dt_E) += h;
                return t;
            };
            for (int col = 0; col <= 3 + 2 * K; ++col)
            {
                const bool is_angle = col == 2;
                const bool is_clock = col == 3 + 2 * K;
                const double h = is_angle ? 1e-7 : is_clock ? 1e-12 : 1e-5;
                const Vec fd = (geom(perturbed(col, h)) - geom(perturbed(col, -h))) / (2.0 * h);
                const Vec an = J.col(col).head(3 * P);
                // angle and delay rows have different units; compare each block on its own
                for (int blk = 0; blk < 3; ++blk)
                {
                    const Vec a = an.segment(blk * P, P), f = fd.segment(blk * P, P);
                    if (a.norm() == 0.0)
                    {
                        CHECK(f.norm() < 1e-9 * (blk == 2 ? 1.0 / kSpeedOfLight : 1.0));
                        continue;
                    }
                    INFO("column " << col << " block " << blk);
                    CHECK((a - f).norm() / a.norm() < 1e-6);
                }
            }
            CHECK(J.bottomRows(2 * P).rightCols(2 * P).isIdentity(0.0));
            CHECK(J(2 * P, 3 + 2 * K) == 1.0);

            // the symbolic map used by the solver agrees with the Jacobian as well
            const Vec eta = location_params(s, link, p);
            CHECK((channel_params_from_location(s, link, eta) - p.stacked()).norm() < 1e-12);
        }

    const Scenario s = default_scenario();
    const Mat J = build_jacobian(s, geometry_to_params(s, Link::bob), Link::bob);
    const Vec2 d = s.p_A - s.p_B;
    CHECK_THAT(J(6, 0), WithinRel(d.x() / (kSpeedOfLight * d.norm()), 1e-13));
    CHECK_THAT(J(6, 1), WithinRel(d.y() / (kSpeedOfLight * d.norm()), 1e-13));
}

TEST_CASE("FIM - Position FIM congruence")
{
    std::mt19937_64 rng(17);
    const Mat Fc = testutil::random_spd(rng, 4);
    const Mat J = testutil::random_matrix(rng, 4, 3);
    const PositionFim fp = position_fim(Fc, J);
    Mat ref = Mat::Zero(3, 3);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (int a = 0; a < 4; ++a)
                for (int b = 0; b < 4; ++b)
                    ref(i, j) += J(a, i) * Fc(a, b) * J(b, j);
    CHECK(max_rel(fp.F, ref) < 1e-13);
    CHECK(fp.Q.rows() == 2);
    CHECK(fp.G.cols() == 1);
    CHECK(fp.Z.rows() == 1);
    CHECK(min_eigenvalue(fp.F) >= -1e-12 * fp.F.norm());
    CHECK(position_fim(Fc, Mat::Zero(4, 3)).F.norm() == 0.0);
}

TEST_CASE("FIM - CRB examples and Schur vs full inverse")
{
    CHECK_THAT(crb_position(partition_position_fim(Mat::Identity(6, 6))), WithinRel(2.0, 1e-14));

    Mat B = Mat::Identity(5, 5);
    B(0, 0) = 4.0;
    B(1, 1) = 0.25;
    B(3, 4) = B(4, 3) = 0.5;
    CHECK_THAT(crb_position(partition_position_fim(B)), WithinRel(4.25, 1e-14));

    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 20; ++trial)
    {
        const int n = 3 + trial;
        Mat F = testutil::random_spd(rng, n, 0.5);
        // spread the scales the way mixed physical units do
        Vec d(n);
        for (int i = 0; i < n; ++i)
            d(i) = std::pow(10.0, (i % 5) - 2.0);
        F = d.asDiagonal() * F * d.asDiagonal();
        const double a = crb_position(partition_position_fim(F));
        const Mat inv = F.inverse();
        CHECK(testutil::rel_err(a, crb_full_inverse(F)) < 1e-8);
        CHECK(testutil::rel_err(a, inv(0, 0) + inv(1, 1)) < 1e-8);
    }
}

TEST_CASE("FIM - Unidentifiable inputs")
{
    Mat F = Mat::Identity(5, 5);
    F(4, 4) = 0.0;
    CHECK_THROWS_AS(crb_position(partition_position_fim(F)), UnidentifiableError);
    Mat G = Mat::Identity(5, 5);
    G.block(2, 2, 2, 2) = Mat::Ones(2, 2);
    try
    {
        crb_position(partition_position_fim(G));
        FAIL("expected UnidentifiableError");
    }
    catch (const UnidentifiableError &e)
    {
        CHECK(e.block() == "Z");
    }
    Mat S = Mat::Identity(3, 3);
    S(0, 2) = S(2, 0) = 1.0;
    S(1, 2) = S(2, 1) = 0.0;
    S(0, 0) = 1.0;
    S(2, 2) = 1.0;
    CHECK_THROWS_AS(crb_position(partition_position_fim(S)), UnidentifiableError);
}

TEST_CASE("FIM - Position map vs direct evaluation")
{
    Scenario s = default_scenario();
    s.M = 64;
    for (Link link : {Link::bob, Link::eve})
    {
        const LinkFim lf = build_link_fim(s, link);
        std::mt19937_64 rng(23);
        for (int trial = 0; trial < 3; ++trial)
        {
            const CMat V = testutil::random_hpsd(rng, 16, 2 + 5 * trial) * 1e-9;
            const Mat direct = position_fim(eval_channel_fim(lf.channel_map, V), lf.jacobian).F;
            CHECK(max_rel(lf.position_fim_at(V), direct) < 1e-10);
            CHECK(testutil::rel_err(lf.crb_at(V), crb_full_inverse(direct)) < 1e-8);
        }
        CHECK(lf.position_map.n_eta == 14);
    }
}
