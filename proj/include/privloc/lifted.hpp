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
// Normalized coordinates for the lifted covariance problems.
//
// The physical position FIM mixes metres, radians, seconds and path gains and
// is far too ill-conditioned for an interior-point method. Every problem is
// therefore posed in normalized coordinates:
//
//   Vn = V / (P/M)                                  (tr Vn <= 1)
//   Fn(Vn) = T' D F_p(V) D T
//
// D is a diagonal equilibration computed at the isotropic covariance, with one
// shared value for both position coordinates. T = [c I, 0; -Z^{-1} G' c, Z^{-1/2}]
// is block lower-triangular, so the position block of Fn^{-1} is the position
// block of F_p^{-1} divided by (c d_pos)^2. CRBs convert exactly:
//
//   CRB_phys = crb_factor * CRB_normalized,   crb_factor = (c d_pos)^2.

#ifndef PRIVLOC_LIFTED_HPP
#define PRIVLOC_LIFTED_HPP

#include "conic.hpp"
#include "fim.hpp"

namespace privloc
{

struct NormalizedLink
{
    Link link = Link::bob;
    int n_eta = 0;
    int n_tx = 0;
    double power_cap = 0.0;  // P/M, W
    Vec dd;                  // diagonal equilibration
    Mat transform;           // T
    double crb_factor = 1.0; // (c d_pos)^2, m^2
    Mat coef;                // svec(Fn) = coef * hermitian_to_params(Vn)

    Mat eval(const Vec &xn) const { return smat(coef * xn); }
    Mat eval(const CMat &Vn) const { return eval(hermitian_to_params(Vn)); }

    /// Physical CRB (m^2) at a normalized covariance.
    double crb(const CMat &Vn) const { return crb_factor * crb_position(partition_position_fim(eval(Vn))); }

    /// Physical position FIM at a physical covariance, recovered from the normalized map.
    Mat physical_fim(const CMat &V) const
    {
        const Mat Fn = eval(CMat(V / power_cap));
        const Mat Ti = transform.inverse();
        const Vec di = dd.cwiseInverse();
        return symmetrize(di.asDiagonal() * Ti.transpose() * Fn * Ti * di.asDiagonal());
    }
};

/// Builds the normalized map of one link. gamma_floor (m^2) raises the position
/// scale so that a privacy threshold reads at most 2 in normalized units.
inline NormalizedLink normalize_link(const LinkFim &lf, double power_cap, double gamma_floor = 0.0)
{
    const int n = lf.position_map.n_tx;
    const int ne = lf.position_map.n_eta;
    NormalizedLink nl;
    nl.link = lf.link;
    nl.n_eta = ne;
    nl.n_tx = n;
    nl.power_cap = power_cap;

    const CMat V0 = CMat::Identity(n, n) / static_cast<double>(n);
    const Mat F0 = power_cap * lf.position_map.eval(V0);

    nl.dd.resize(ne);
    for (int i = 0; i < ne; ++i)
    {
        if (!(F0(i, i) > 0.0))
            throw UnidentifiableError("F", "parameter " + std::to_string(i) + " carries no information at V0");
        nl.dd(i) = 1.0 / std::sqrt(F0(i, i));
    }
    nl.dd(0) = nl.dd(1) = 1.0 / std::sqrt(0.5 * (F0(0, 0) + F0(1, 1)));
    const Mat Fs = symmetrize(nl.dd.asDiagonal() * F0 * nl.dd.asDiagonal());

    const PositionFim part = partition_position_fim(Fs);
    double c = std::sqrt(crb_position(part) / 2.0);
    if (gamma_floor > 2.0 * std::pow(c * nl.dd(0), 2))
        c = std::sqrt(gamma_floor / 2.0) / nl.dd(0);

    Eigen::SelfAdjointEigenSolver<Mat> es(part.Z);
    if (!(es.eigenvalues()(0) > 0.0))
        throw UnidentifiableError("Z", "nuisance block is not positive definite at V0");
    const Mat Zih = es.eigenvectors() * es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
                    es.eigenvectors().transpose();
    const int nz = ne - 2;
    nl.transform = Mat::Zero(ne, ne);
    nl.transform.topLeftCorner(2, 2) = c * Mat::Identity(2, 2);
    nl.transform.bottomLeftCorner(nz, 2) = -c * es.eigenvectors() *
                                           es.eigenvalues().cwiseInverse().asDiagonal() *
                                           es.eigenvectors().transpose() * part.G.transpose();
    nl.transform.bottomRightCorner(nz, nz) = Zih;
    nl.crb_factor = std::pow(c * nl.dd(0), 2);

    const Mat DT = nl.dd.asDiagonal() * nl.transform;
    nl.coef.resize(lf.position_map.coef.rows(), lf.position_map.coef.cols());
    for (int a = 0; a < lf.position_map.coef.cols(); ++a)
    {
        const Mat B = smat(lf.position_map.coef.col(a));
        nl.coef.col(a) = power_cap * svec(Mat(DT.transpose() * B * DT));
    }
    return nl;
}

/// Both links of a scenario with their normalized maps.
struct LiftedProblem
{
    Scenario scenario;
    DerivedConstants constants;
    LinkFim bob_fim;
    LinkFim eve_fim;
    NormalizedLink bob;
    NormalizedLink eve;

    int n_tx() const { return bob.n_tx; }
    double power_cap() const { return constants.power_cap; }

    double bob_crb(const CMat &V) const { return bob_fim.crb_at(V); }
    double eve_crb(const CMat &V) const { return eve_fim.crb_at(V); }

    /// Re-scales the Eve map for a privacy threshold gamma (m^2).
    void set_gamma(double gamma) { eve = normalize_link(eve_fim, constants.power_cap, gamma); }
};

inline LiftedProblem build_lifted_problem(const Scenario &s, double gamma = 0.0)
{
    LiftedProblem lp;
    lp.scenario = s;
    lp.constants = derive_constants(s);
    lp.bob_fim = build_link_fim(s, Link::bob);
    lp.eve_fim = build_link_fim(s, Link::eve);
    lp.bob = normalize_link(lp.bob_fim, lp.constants.power_cap);
    lp.eve = normalize_link(lp.eve_fim, lp.constants.power_cap, gamma);
    return lp;
}

// ---- expression helpers --------------------------------------------------

/// Fn(Vn) as an affine matrix expression of a Hermitian program block.
inline conic::Expr fim_expression(const conic::ConicProgram &prog, int v_block, const NormalizedLink &nl)
{
    const conic::VarBlock &b = prog.variable(v_block);
    if (b.kind != conic::BlockKind::hermitian || b.dim != nl.n_tx)
        throw std::invalid_argument("fim_expression: block is not the n_tx Hermitian covariance");
    const int n = nl.n_eta;
    Mat full(n * n, nl.coef.cols());
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i)
            full.row(j * n + i) = nl.coef.row(svec_index(n, i, j)) * (i == j ? 1.0 : 1.0 / kSqrt2);
    return conic::Expr::linear(n, n, full, b.offset);
}

/// Adds Vn (Hermitian PSD, tr Vn <= 1) and U with [Qn - U, Gn; Gn', Zn] PSD, U PSD,
/// and returns tr(U^{-1}) through its epigraph.
struct CrbBlocks
{
    int v = -1;
    int u = -1;
    conic::Expr crb_term;
};

inline CrbBlocks add_crb_epigraph(conic::ConicProgram &prog, const NormalizedLink &bob)
{
    using conic::Expr;
    CrbBlocks out;
    out.v = prog.add_hermitian("V", bob.n_tx, true);
    out.u = prog.add_symmetric("U", 2, true);
    const Expr Vr = prog.matrix(out.v);
    prog.add_nonneg(Expr::scalar(2.0) - Vr.trace()); // realified trace is 2 tr(Vn)
    const Expr F = fim_expression(prog, out.v, bob);
    const int nz = bob.n_eta - 2;
    const Expr Upad = Expr::blocks({{prog.matrix(out.u), Expr::zeros(2, nz)},
                                    {Expr::zeros(nz, 2), Expr::zeros(nz, nz)}});
    prog.add_psd(F - Upad);
    out.crb_term = conic::epigraph_trace_inverse(prog, prog.matrix(out.u));
    return out;
}

} // namespace privloc

#endif
