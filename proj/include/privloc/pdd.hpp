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
// Privacy-constrained covariance design by penalty dual decomposition.
//
// Eve's inverse FIM is replaced by a free PSD matrix Phi tied to the Eve FIM
// through F_E(V) Phi = I, which is relaxed into the augmented Lagrangian
//
//   L(V, U, Phi) = tr(U^{-1}) + rho/2 || F_E(V) Phi - I + Theta/rho ||_F^2.
//
// The inner loop alternates exact minimization over (V, U) and over Phi; the
// outer loop either moves the multiplier Theta or grows rho. All matrices in
// this file (F, Phi, Theta, U) live in the normalized coordinates of
// lifted.hpp; only V and CRBs are reported physically.

#ifndef PRIVLOC_PDD_HPP
#define PRIVLOC_PDD_HPP

#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "benchmarks.hpp"

namespace privloc
{

enum class PddInit
{
    benchmark, // Bob-CRB minimizer (see README)
    isotropic  // (P / (M M_A)) I
};

struct PddConfig
{
    double rho0 = 1.0;
    double delta = 2.0;
    double q = 0.7;
    double inner_tol = 1e-6; // relative BCD objective change
    int inner_max = 30;
    double outer_tol = 1e-5;
    int outer_max = 60;
    double solver_tol = 1e-8;
    PddInit init = PddInit::benchmark;

    void validate() const
    {
        if (!(delta > 1.0))
            throw ConfigError("pdd: delta must exceed 1");
        if (!(q > 0.0 && q < 1.0))
            throw ConfigError("pdd: q must lie in (0, 1)");
        if (!(rho0 > 0.0) || !(inner_tol > 0.0) || !(outer_tol > 0.0) || !(solver_tol > 0.0))
            throw ConfigError("pdd: rho0 and tolerances must be positive");
        if (inner_max < 1 || outer_max < 1)
            throw ConfigError("pdd: iteration caps must be positive");
    }

    conic::Settings solver() const
    {
        conic::Settings s;
        s.tol = solver_tol;
        return s;
    }
};

struct PddTraceRow
{
    int k = 0;
    int inner = 0;          // BCD sweeps in this outer iteration
    double objective = 0.0; // augmented Lagrangian after the sweep
    double h = 0.0;
    double rho = 0.0; // penalty used by the sweep
    double bob_crb = 0.0;
    double eve_crb = 0.0;
    bool dual_step = false;
};

struct LiftedSolution
{
    CMat V;    // physical covariance, W
    Mat U;     // normalized, U ~ Bob's equivalent position FIM
    Mat Phi;   // normalized
    Mat Theta; // normalized
    double rho = 0.0;
    double h = std::numeric_limits<double>::infinity();
    double bob_crb = 0.0; // m^2
    double eve_crb = 0.0; // m^2
    bool converged = false;
    std::string status;
    std::vector<PddTraceRow> trace;
    // augmented Lagrangian after each half-step, one list per outer iteration
    std::vector<std::vector<double>> bcd_objectives;
};

/// Entrywise max |F Phi - I|.
inline double violation(const Mat &F, const Mat &Phi)
{
    if (F.rows() != F.cols() || Phi.rows() != Phi.cols() || F.rows() != Phi.rows())
        throw std::invalid_argument("violation: square matrices of equal size expected");
    return (F * Phi - Mat::Identity(F.rows(), F.cols())).cwiseAbs().maxCoeff();
}

/// L(V, Phi) with U eliminated: the minimizing U is Bob's Schur complement.
inline double augmented_objective(const NormalizedLink &bob, const NormalizedLink &eve, const CMat &Vn,
                                  const Mat &Phi, const Mat &Theta, double rho)
{
    const double crb = crb_position(partition_position_fim(bob.eval(Vn)));
    if (rho <= 0.0)
        return crb;
    const Mat R = eve.eval(Vn) * Phi - Mat::Identity(Phi.rows(), Phi.cols()) + Theta / rho;
    return crb + 0.5 * rho * R.squaredNorm();
}

struct VUStep
{
    CMat Vn; // normalized covariance, tr <= 1
    Mat U;
    double objective = 0.0;
    conic::SolverReport report;
};

/// Minimizes tr(U^{-1}) + rho/2 ||F_E(V) Phi - I + Theta/rho||^2 over (V, U).
/// rho = 0 drops the penalty.
inline VUStep solve_subproblem_VU(const NormalizedLink &bob, const NormalizedLink &eve, const Mat &Phi,
                                  const Mat &Theta, double rho, const conic::Settings &settings = {})
{
    using conic::Expr;
    conic::ConicProgram prog;
    const CrbBlocks cb = add_crb_epigraph(prog, bob);
    Expr obj = cb.crb_term;
    if (rho > 0.0)
    {
        const int n = eve.n_eta;
        const Mat C = Mat::Identity(n, n) - Theta / rho;
        const Expr R = fim_expression(prog, cb.v, eve) * Phi - Expr::constant(C);
        const Expr t = conic::epigraph_frobenius(prog, R);
        obj = obj + (0.5 * rho) * conic::epigraph_square(prog, t);
    }
    prog.minimize(obj);
    VUStep out;
    out.report = prog.solve(settings);
    if (!out.report.usable())
        throw conic::SolverError(out.report.status, "solve_subproblem_VU");
    out.Vn = prog.hermitian_value(cb.v, out.report.x);
    out.U = prog.value(cb.u, out.report.x);
    out.objective = out.report.objective;
    return out;
}

/// Minimizes ||F Phi - I + Theta/rho||_F over Phi PSD with Phi_11 + Phi_22 >= gamma.
inline Mat solve_subproblem_Phi(const Mat &F, const Mat &Theta, double rho, double gamma,
                                const conic::Settings &settings = {})
{
    using conic::Expr;
    const int n = static_cast<int>(F.rows());
    if (F.cols() != n || Theta.rows() != n || Theta.cols() != n || !(rho > 0.0))
        throw std::invalid_argument("solve_subproblem_Phi: bad dimensions or rho");
    conic::ConicProgram prog;
    const int p = prog.add_symmetric("Phi", n, true);
    const Expr Phi = prog.matrix(p);
    prog.add_nonneg(Phi.entry(0, 0) + Phi.entry(1, 1) - Expr::scalar(gamma));
    const Mat C = Mat::Identity(n, n) - Theta / rho;
    prog.minimize(conic::epigraph_frobenius(prog, F * Phi - Expr::constant(C)));
    const conic::SolverReport rep = prog.solve(settings);
    if (!rep.usable())
        throw conic::SolverError(rep.status, "solve_subproblem_Phi");
    return symmetrize(prog.value(p, rep.x));
}

namespace detail
{

inline Mat spd_inverse(const Mat &A)
{
    return symmetrize(Eigen::LDLT<Mat>(symmetrize(A)).solve(Mat::Identity(A.rows(), A.cols())));
}

} // namespace detail

/// Penalty dual decomposition for min CRB_B(V) s.t. CRB_E(V) >= gamma,
/// tr V <= P/M, V PSD. V0 (physical) overrides the configured initialization.
inline LiftedSolution run_pdd(const LiftedProblem &lp, double gamma, const PddConfig &cfg,
                              const std::optional<CMat> &V0 = std::nullopt, std::ostream *log = nullptr)
{
    cfg.validate();
    if (!(gamma >= 0.0) || !std::isfinite(gamma))
        throw std::invalid_argument("run_pdd: gamma must be finite and nonnegative");
    const conic::Settings settings = cfg.solver();
    const NormalizedLink &bob = lp.bob;
    const NormalizedLink eve = normalize_link(lp.eve_fim, lp.power_cap(), gamma);
    const double gamma_n = gamma / eve.crb_factor;
    const double cap = lp.power_cap();
    const int n = eve.n_eta;

    CMat Vn;
    if (V0)
        Vn = *V0 / cap;
    else if (cfg.init == PddInit::benchmark)
        Vn = crb_min_unconstrained(lp, settings) / cap;
    else
        Vn = CMat::Identity(lp.n_tx(), lp.n_tx()) / static_cast<double>(lp.n_tx());

    LiftedSolution sol;
    Mat Phi = detail::spd_inverse(eve.eval(Vn));
    Mat Theta = Mat::Zero(n, n);
    Mat U = Mat::Zero(2, 2);
    double rho = cfg.rho0;
    // BCD descent needs a feasible starting block
    if (Phi(0, 0) + Phi(1, 1) < gamma_n)
        Phi = solve_subproblem_Phi(eve.eval(Vn), Theta, rho, gamma_n, settings);
    double h_prev = std::numeric_limits<double>::infinity();

    LiftedSolution best;
    best.h = std::numeric_limits<double>::infinity();

    if (log)
        *log << "k,inner,objective,h,rho,bob_crb,eve_crb,step\n";

    for (int k = 1; k <= cfg.outer_max; ++k)
    {
        std::vector<double> objs;
        double prev = std::numeric_limits<double>::infinity();
        int it = 0;
        double obj = 0.0;
        Mat F;
        for (it = 1; it <= cfg.inner_max; ++it)
        {
            VUStep vu;
            try
            {
                vu = solve_subproblem_VU(bob, eve, Phi, Theta, rho, settings);
            }
            catch (const conic::SolverError &e)
            {
                throw conic::SolverError(e.status(), "run_pdd outer " + std::to_string(k) + " inner " +
                                                         std::to_string(it) + ": (V,U) step");
            }
            Vn = vu.Vn;
            U = vu.U;
            objs.push_back(augmented_objective(bob, eve, Vn, Phi, Theta, rho));
            F = eve.eval(Vn);
            try
            {
                Phi = solve_subproblem_Phi(F, Theta, rho, gamma_n, settings);
            }
            catch (const conic::SolverError &e)
            {
                throw conic::SolverError(e.status(), "run_pdd outer " + std::to_string(k) + " inner " +
                                                         std::to_string(it) + ": Phi step");
            }
            obj = augmented_objective(bob, eve, Vn, Phi, Theta, rho);
            objs.push_back(obj);
            if (std::abs(prev - obj) < cfg.inner_tol * std::max(1.0, std::abs(obj)))
                break;
            prev = obj;
        }
        sol.bcd_objectives.push_back(objs);

        const double h = violation(F, Phi);
        PddTraceRow row;
        row.k = k;
        row.inner = std::min(it, cfg.inner_max);
        row.objective = obj;
        row.h = h;
        row.rho = rho;
        row.bob_crb = bob.crb(Vn);
        row.eve_crb = lp.eve_crb(cap * Vn);
        row.dual_step = h <= cfg.q * h_prev;
        if (row.dual_step)
            Theta += rho * (F * Phi - Mat::Identity(n, n));
        else
            rho *= cfg.delta;
        h_prev = h;
        sol.trace.push_back(row);
        if (log)
            *log << row.k << "," << row.inner << "," << detail::fmt_double(row.objective) << "," << detail::fmt_double(row.h) << ","
                 << detail::fmt_double(row.rho) << "," << detail::fmt_double(row.bob_crb) << "," << detail::fmt_double(row.eve_crb) << ","
                 << (row.dual_step ? "dual" : "penalty") << "\n";

        if (h < best.h)
        {
            best.V = cap * Vn;
            best.U = U;
            best.Phi = Phi;
            best.Theta = Theta;
            best.rho = rho;
            best.h = h;
        }
        if (h < cfg.outer_tol)
        {
            sol.converged = true;
            break;
        }
    }

    sol.V = best.V;
    sol.U = best.U;
    sol.Phi = best.Phi;
    sol.Theta = best.Theta;
    sol.rho = best.rho;
    sol.h = best.h;
    sol.bob_crb = lp.bob_crb(sol.V);
    sol.eve_crb = lp.eve_crb(sol.V);
    sol.status = sol.converged ? "converged" : "outer-limit";
    return sol;
}

inline LiftedSolution run_pdd(const Scenario &s, double gamma, const PddConfig &cfg)
{
    return run_pdd(build_lifted_problem(s), gamma, cfg);
}

// ---- beamformer extraction -----------------------------------------------

enum class ExtractMode
{
    decomposition,
    randomization
};

struct Beamformers
{
    CMat W; // M_A x L
    double reconstruction_error = 0.0;
};

namespace detail
{

inline double relative_gap(const CMat &W, const CMat &V)
{
    const double nv = V.norm();
    return nv > 0.0 ? (W * W.adjoint() - V).norm() / nv : (W * W.adjoint()).norm();
}

} // namespace detail

/// W = E Lambda^{1/2} over the top-L eigenpairs of V, each column rotated so
/// its largest-magnitude entry is real and positive.
inline Beamformers extract_decomposition(const CMat &V, int L)
{
    if (V.rows() != V.cols() || L < 1)
        throw std::invalid_argument("extract_beamformers: square V and L >= 1 required");
    const int n = static_cast<int>(V.rows());
    Eigen::SelfAdjointEigenSolver<CMat> es(0.5 * (V + V.adjoint()));
    Beamformers b;
    b.W = CMat::Zero(n, L);
    for (int l = 0; l < std::min(L, n); ++l)
    {
        const int idx = n - 1 - l;
        const double lam = std::max(es.eigenvalues()(idx), 0.0);
        CVec e = es.eigenvectors().col(idx);
        Eigen::Index imax = 0;
        e.cwiseAbs().maxCoeff(&imax);
        e *= std::conj(e(imax)) / std::abs(e(imax));
        b.W.col(l) = std::sqrt(lam) * e;
    }
    b.reconstruction_error = detail::relative_gap(b.W, V);
    return b;
}

/// Gaussian rounding: candidates E Lambda^{1/2} g with g ~ CN(0, I), rescaled to
/// the power of V. The best candidate has the lowest Bob CRB among those with
/// Eve CRB >= gamma, or the lowest shortfall when none qualifies.
inline Beamformers extract_randomization(const CMat &V, int L, const LiftedProblem &lp, double gamma,
                                         std::uint64_t seed, int candidates = 64)
{
    if (V.rows() != V.cols() || L < 1 || candidates < 1)
        throw std::invalid_argument("extract_beamformers: square V, L >= 1 and candidates >= 1 required");
    const int n = static_cast<int>(V.rows());
    Eigen::SelfAdjointEigenSolver<CMat> es(0.5 * (V + V.adjoint()));
    const Vec lam = es.eigenvalues().cwiseMax(0.0);
    const CMat root = es.eigenvectors() * lam.cwiseSqrt().asDiagonal();
    const double power = V.trace().real();

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, std::sqrt(0.5));
    Beamformers best;
    bool best_feasible = false;
    double best_key = std::numeric_limits<double>::infinity();
    for (int c = 0; c < candidates; ++c)
    {
        CMat G(n, L);
        for (int j = 0; j < L; ++j)
            for (int i = 0; i < n; ++i)
                G(i, j) = cplx(normal(rng), normal(rng));
        CMat W = root * G / std::sqrt(static_cast<double>(L));
        const double pw = (W * W.adjoint()).trace().real();
        if (!(pw > 0.0))
            continue;
        W *= std::sqrt(power / pw);
        const CMat Vc = W * W.adjoint();
        double bob = std::numeric_limits<double>::infinity(), eve = 0.0;
        try
        {
            bob = lp.bob_crb(Vc);
            eve = lp.eve_crb(Vc);
        }
        catch (const UnidentifiableError &)
        {
            eve = std::numeric_limits<double>::infinity(); // Eve cannot localize at all
            try
            {
                bob = lp.bob_crb(Vc);
            }
            catch (const UnidentifiableError &)
            {
                continue;
            }
        }
        const bool feasible = eve >= gamma;
        const double key = feasible ? bob : gamma - eve;
        if ((feasible && !best_feasible) || (feasible == best_feasible && key < best_key))
        {
            best.W = W;
            best_feasible = feasible;
            best_key = key;
        }
    }
    if (best.W.size() == 0)
        throw std::runtime_error("extract_beamformers: no usable randomization candidate");
    best.reconstruction_error = detail::relative_gap(best.W, V);
    return best;
}

} // namespace privloc

#endif
