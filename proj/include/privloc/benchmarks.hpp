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
//
// Reference designs without a privacy term. Both reach privacy only by
// scaling the transmit power down, using CRB(cV) = CRB(V) / c.

#ifndef PRIVLOC_BENCHMARKS_HPP
#define PRIVLOC_BENCHMARKS_HPP

#include <limits>
#include <vector>

#include "lifted.hpp"

namespace privloc
{

struct BenchmarkResult
{
    CMat V;
    double power_used = 0.0; // W, summed over subcarriers
    double bob_crb = 0.0;    // m^2
    double eve_crb = 0.0;    // m^2
    double scale = 1.0;      // applied power factor in (0, 1]
};

/// Bob-CRB minimizer over tr(V) <= P/M, V PSD. Returns the physical covariance.
inline CMat crb_min_unconstrained(const LiftedProblem &lp, const conic::Settings &settings = {})
{
    conic::ConicProgram prog;
    const CrbBlocks cb = add_crb_epigraph(prog, lp.bob);
    prog.minimize(cb.crb_term);
    const conic::SolverReport rep = prog.solve(settings);
    if (!rep.usable())
        throw conic::SolverError(rep.status, "crb_min_unconstrained");
    return lp.power_cap() * prog.hermitian_value(cb.v, rep.x);
}

/// Scales V down until Eve's CRB reaches gamma; scale = min(1, CRB_E(V) / gamma).
inline BenchmarkResult power_backoff(const CMat &V, double gamma, const LiftedProblem &lp)
{
    if (!std::isfinite(gamma) || gamma < 0.0)
        throw std::invalid_argument("power_backoff: gamma must be finite and nonnegative");
    const double eve = lp.eve_crb(V);
    if (!(eve > 0.0) || !std::isfinite(eve))
        throw std::invalid_argument("power_backoff: Eve CRB of V must be positive and finite");
    BenchmarkResult r;
    r.scale = gamma > eve ? eve / gamma : 1.0;
    r.V = r.scale * V;
    r.power_used = r.V.trace().real() * lp.scenario.M;
    r.bob_crb = lp.bob_crb(V) / r.scale;
    r.eve_crb = eve / r.scale;
    return r;
}

struct CodebookDesign
{
    std::vector<CVec> beams; // unit-norm codewords
    Vec powers;              // W per beam and subcarrier
    CMat V;
};

/// Unit-norm steering vectors and angle derivatives toward every Bob-link path.
inline std::vector<CVec> bob_codebook(const LiftedProblem &lp)
{
    std::vector<CVec> beams;
    const LinkParams &p = lp.bob_fim.params;
    for (int k = 0; k < p.paths(); ++k)
    {
        beams.push_back(steering(p.theta_A(k), p.n_tx).normalized());
        beams.push_back(steering_derivative(p.theta_A(k), p.n_tx).normalized());
    }
    return beams;
}

/// Nonnegative power loading over the codebook minimizing Bob's CRB with
/// sum_i p_i ||b_i||^2 <= P/M.
inline CodebookDesign codebook_power_allocation(const LiftedProblem &lp, const conic::Settings &settings = {})
{
    using conic::Expr;
    CodebookDesign d;
    d.beams = bob_codebook(lp);
    const int nb = static_cast<int>(d.beams.size());
    const int ne = lp.bob.n_eta;

    // Fn is linear in V, so each beam contributes Fn(b b^H) per unit normalized power
    Mat coef(ne * ne, nb);
    for (int i = 0; i < nb; ++i)
    {
        const Mat Fi = lp.bob.eval(CMat(d.beams[i] * d.beams[i].adjoint()));
        coef.col(i) = Eigen::Map<const Vec>(Fi.data(), Fi.size());
    }

    conic::ConicProgram prog;
    const int pv = prog.add_vector("p", nb);
    const int u = prog.add_symmetric("U", 2, true);
    const Expr P = prog.matrix(pv);
    prog.add_nonneg(P);
    prog.add_nonneg(Expr::scalar(1.0) - Mat(Mat::Ones(1, nb)) * P);
    const Expr F = Expr::linear(ne, ne, coef, prog.variable(pv).offset);
    const int nz = ne - 2;
    prog.add_psd(F - Expr::blocks({{prog.matrix(u), Expr::zeros(2, nz)}, {Expr::zeros(nz, 2), Expr::zeros(nz, nz)}}));
    prog.minimize(conic::epigraph_trace_inverse(prog, prog.matrix(u)));
    const conic::SolverReport rep = prog.solve(settings);
    if (!rep.usable())
        throw conic::SolverError(rep.status, "codebook_power_allocation");

    d.powers = lp.power_cap() * prog.value(pv, rep.x).col(0).cwiseMax(0.0);
    d.V = CMat::Zero(lp.n_tx(), lp.n_tx());
    for (int i = 0; i < nb; ++i)
        d.V.noalias() += d.powers(i) * d.beams[i] * d.beams[i].adjoint();
    return d;
}

} // namespace privloc

#endif
