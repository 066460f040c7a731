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

#include "privloc/benchmarks.hpp"
#include "privloc/pdd.hpp"
#include "test_util.hpp"

// Covered tests:
// - Violation function
// - Phi step: inactive threshold, diagonal KKT case, constraint audit
// - (V,U) step without penalty reproduces the unconstrained CRB minimizer
// - (V,U) step power scaling and trace audit
// - Outer loop at gamma = 0, trace contract and determinism
// - Configuration checks
// - Beamformer extraction by decomposition and randomization

using namespace privloc;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace
{

const LiftedProblem &default_problem()
{
    static const LiftedProblem lp = build_lifted_problem(default_scenario());
    return lp;
}

} // namespace

TEST_CASE("PDD - Violation function")
{
    std::mt19937_64 rng(1);
    const Mat F = testutil::random_spd(rng, 5);
    CHECK(violation(F, F.inverse()) < 1e-12);

    Mat Phi = Mat::Identity(4, 4);
    Phi(1, 3) += 0.125;
    CHECK(violation(Mat::Identity(4, 4), Phi) == 0.125);

    const Mat A = testutil::random_matrix(rng, 6, 6), B = testutil::random_matrix(rng, 6, 6);
    const Mat R = A * B;
    double brute = 0.0;
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j)
            brute = std::max(brute, std::abs(R(i, j) - (i == j ? 1.0 : 0.0)));
    CHECK_THAT(violation(A, B), WithinAbs(brute, 1e-14));
    CHECK_THROWS_AS(violation(A, Mat::Identity(3, 3)), std::invalid_argument);
}

TEST_CASE("PDD - Phi step")
{
    std::mt19937_64 rng(2);
    const int n = 6;
    const Mat F = testutil::random_spd(rng, n, 1.0);
    const Mat Finv = F.inverse();
    const double crb = Finv(0, 0) + Finv(1, 1);
    const Mat Phi = solve_subproblem_Phi(F, Mat::Zero(n, n), 1.0, 0.5 * crb);
    CHECK((Phi - Finv).norm() < 1e-6 * Finv.norm());

    const Mat P4 = solve_subproblem_Phi(Mat::Identity(n, n), Mat::Zero(n, n), 1.0, 4.0);
    Mat ref = Mat::Identity(n, n);
    ref(0, 0) = ref(1, 1) = 2.0;
    CHECK((P4 - ref).norm() < 1e-6);

    for (int trial = 0; trial < 5; ++trial)
    {
        const Mat Fr = testutil::random_spd(rng, n, 0.2);
        const Mat Th = testutil::random_matrix(rng, n, n) * 0.1;
        const double gamma = 3.0 + trial;
        const Mat Pr = solve_subproblem_Phi(Fr, Th, 2.0, gamma);
        CHECK(Pr(0, 0) + Pr(1, 1) >= gamma - 1e-8);
        CHECK(min_eigenvalue(Pr) >= -1e-8);
    }
    CHECK_THROWS_AS(solve_subproblem_Phi(F, Mat::Zero(n, n), 0.0, 1.0), std::invalid_argument);
}

TEST_CASE("PDD - (V,U) step without penalty")
{
    const LiftedProblem &lp = default_problem();
    const int n = lp.eve.n_eta;
    const VUStep st = solve_subproblem_VU(lp.bob, lp.eve, Mat::Identity(n, n), Mat::Zero(n, n), 0.0);
    REQUIRE(st.report.usable());
    const double crb_n = crb_position(partition_position_fim(lp.bob.eval(st.Vn)));
    CHECK(testutil::rel_err(st.objective, crb_n) < 1e-4);
    CHECK(st.Vn.trace().real() <= 1.0 + 1e-9);
    CHECK(min_eigenvalue(st.Vn) >= -1e-8);

    const CMat V1 = crb_min_unconstrained(lp);
    CHECK(testutil::rel_err(lp.bob_crb(lp.power_cap() * st.Vn), lp.bob_crb(V1)) < 1e-4);

    // isotropic full power is feasible, so the minimizer cannot be worse
    const CMat Viso = CMat::Identity(16, 16) * (lp.power_cap() / 16.0);
    CHECK(lp.bob_crb(V1) <= lp.bob_crb(Viso));

    // the CRB scales inversely with transmit power
    Scenario s2 = default_scenario();
    s2.P_dbm += 10.0 * std::log10(2.0);
    const LiftedProblem lp2 = build_lifted_problem(s2);
    const VUStep st2 = solve_subproblem_VU(lp2.bob, lp2.eve, Mat::Identity(n, n), Mat::Zero(n, n), 0.0);
    CHECK_THAT(st2.objective * lp2.bob.crb_factor, WithinRel(0.5 * st.objective * lp.bob.crb_factor, 1e-3));
}

TEST_CASE("PDD - (V,U) step with penalty")
{
    const LiftedProblem &lp = default_problem();
    const int n = lp.eve.n_eta;
    std::mt19937_64 rng(6);
    const CMat Vn0 = CMat::Identity(16, 16) / 16.0;
    const Mat Phi = lp.eve.eval(Vn0).inverse() * 1.5;
    const Mat Theta = testutil::random_matrix(rng, n, n) * 0.01;
    const double rho = 3.0;
    const VUStep st = solve_subproblem_VU(lp.bob, lp.eve, Phi, Theta, rho);
    REQUIRE(st.report.usable());
    CHECK(st.Vn.trace().real() <= 1.0 + 1e-9);
    const double direct = augmented_objective(lp.bob, lp.eve, st.Vn, Phi, Theta, rho);
    CHECK(testutil::rel_err(st.objective, direct) < 1e-5);
    // the step minimizes the augmented objective, so it is no worse than the start
    CHECK(direct <= augmented_objective(lp.bob, lp.eve, Vn0, Phi, Theta, rho) + 1e-7);
}

TEST_CASE("PDD - Outer loop at gamma zero")
{
    const LiftedProblem &lp = default_problem();
    PddConfig cfg;
    const LiftedSolution sol = run_pdd(lp, 0.0, cfg);
    const double b1 = lp.bob_crb(crb_min_unconstrained(lp));
    CHECK(sol.converged);
    CHECK(testutil::rel_err(sol.bob_crb, b1) < 0.01);
    REQUIRE_FALSE(sol.trace.empty());
    CHECK(sol.trace.back().h < cfg.outer_tol);
    for (std::size_t i = 1; i < sol.trace.size(); ++i)
        CHECK(sol.trace[i].rho >= sol.trace[i - 1].rho);
    CHECK_THAT(sol.V.trace().real(), WithinRel(lp.power_cap(), 1e-4));

    const LiftedSolution again = run_pdd(lp, 0.0, cfg);
    REQUIRE(again.trace.size() == sol.trace.size());
    for (std::size_t i = 0; i < sol.trace.size(); ++i)
    {
        CHECK(again.trace[i].objective == sol.trace[i].objective);
        CHECK(again.trace[i].h == sol.trace[i].h);
    }
    CHECK((again.V - sol.V).norm() == 0.0);
}

TEST_CASE("PDD - Configuration checks")
{
    PddConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.q = 1.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = PddConfig{};
    cfg.delta = 1.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = PddConfig{};
    cfg.inner_max = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    CHECK_THROWS_AS(run_pdd(default_problem(), -1.0, PddConfig{}), std::invalid_argument);
}

TEST_CASE("PDD - Extraction by decomposition")
{
    std::mt19937_64 rng(10);
    const CVec v = testutil::random_cmatrix(rng, 16, 1).col(0);
    const Beamformers r1 = extract_decomposition(v * v.adjoint(), 1);
    CHECK(r1.reconstruction_error < 1e-10);
    CHECK(extract_decomposition(v * v.adjoint(), 4).reconstruction_error < 1e-10);

    const CMat V = testutil::random_hpsd(rng, 16, 16);
    const Beamformers full = extract_decomposition(V, 16);
    CHECK(full.reconstruction_error < 1e-10);
    CHECK(full.W.cols() == 16);
    for (int l = 0; l < 16; ++l)
    {
        Eigen::Index imax = 0;
        full.W.col(l).cwiseAbs().maxCoeff(&imax);
        CHECK(std::abs(full.W(imax, l).imag()) < 1e-12 * std::abs(full.W(imax, l)));
        CHECK(full.W(imax, l).real() > 0.0);
        if (l > 0)
            CHECK(full.W.col(l).norm() <= full.W.col(l - 1).norm() + 1e-12);
    }

    for (int rank : {2, 5, 9})
    {
        const CMat Vr = testutil::random_hpsd(rng, 16, rank);
        const Beamformers b = extract_decomposition(Vr, rank);
        CHECK((b.W * b.W.adjoint() - Vr).norm() / Vr.norm() < 1e-9);
        CHECK(extract_decomposition(Vr, rank - 1).reconstruction_error > 1e-3);
    }
    CHECK_THROWS_AS(extract_decomposition(V, 0), std::invalid_argument);
}

TEST_CASE("PDD - Extraction by randomization")
{
    const LiftedProblem &lp = default_problem();
    const CMat V = crb_min_unconstrained(lp);
    const Beamformers a = extract_randomization(V, 16, lp, 0.0, 42, 16);
    const Beamformers b = extract_randomization(V, 16, lp, 0.0, 42, 16);
    CHECK((a.W - b.W).norm() == 0.0);
    CHECK_THAT((a.W * a.W.adjoint()).trace().real(), WithinRel(V.trace().real(), 1e-12));
    // an unreachable threshold falls back to the smallest shortfall instead of failing
    CHECK_NOTHROW(extract_randomization(V, 4, lp, 1e6, 1, 8));
}
