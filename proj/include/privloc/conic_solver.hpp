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
// Dense primal-dual interior-point method for the standard-form cone program
//
//     minimize    c'x
//     subject to  G x + s = h,   A x = b,   s in K,
//
// where K is a product of a nonnegative orthant, second-order cones and PSD
// cones (in svec form). The iteration works on the homogeneous self-dual
// embedding, so infeasible and unbounded programs end with a certificate
// instead of diverging. Search directions use Nesterov-Todd scaling with a
// Mehrotra predictor-corrector step.

#ifndef PRIVLOC_CONIC_SOLVER_HPP
#define PRIVLOC_CONIC_SOLVER_HPP

#include <algorithm>
#include <iomanip>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "linalg.hpp"

namespace privloc::conic
{

struct Cones
{
    int nonneg = 0;
    std::vector<int> soc; // cone dimensions (>= 1)
    std::vector<int> psd; // matrix orders

    int rows() const
    {
        int m = nonneg;
        for (int q : soc)
            m += q;
        for (int n : psd)
            m += svec_size(n);
        return m;
    }
    /// Degree of the cone: number of "eigenvalues".
    int degree() const
    {
        int d = nonneg + static_cast<int>(soc.size());
        for (int n : psd)
            d += n;
        return d;
    }
};

struct StandardForm
{
    Vec c;
    Mat G;
    Vec h;
    Mat A;
    Vec b;
    Cones cones;
    double objective_offset = 0.0;

    int num_vars() const { return static_cast<int>(c.size()); }
};

enum class Status
{
    optimal,
    inaccurate,
    infeasible,
    unbounded,
    iteration_limit
};

inline const char *status_name(Status s)
{
    switch (s)
    {
    case Status::optimal:
        return "optimal";
    case Status::inaccurate:
        return "inaccurate";
    case Status::infeasible:
        return "infeasible";
    case Status::unbounded:
        return "unbounded";
    case Status::iteration_limit:
        return "iteration-limit";
    }
    return "unknown";
}

struct Settings
{
    double tol = 1e-8; // feasibility, absolute and relative gap tolerance
    int max_iter = 120;
    int refinement_steps = 2;
    std::ostream *log = nullptr; // per-iteration progress when set
};

struct RawSolution
{
    Status status = Status::iteration_limit;
    Vec x, s, y, z;
    double primal_objective = 0.0;
    double dual_objective = 0.0;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    double gap = 0.0;
    int iterations = 0;
};

namespace detail
{

// ---- cone arithmetic on stacked vectors ----------------------------------

template <class F>
void for_each_block(const Cones &k, F &&f)
{
    int off = 0;
    if (k.nonneg > 0)
        f(0, 0, off, k.nonneg);
    off += k.nonneg;
    for (std::size_t i = 0; i < k.soc.size(); ++i)
    {
        f(1, static_cast<int>(i), off, k.soc[i]);
        off += k.soc[i];
    }
    for (std::size_t i = 0; i < k.psd.size(); ++i)
    {
        f(2, static_cast<int>(i), off, svec_size(k.psd[i]));
        off += svec_size(k.psd[i]);
    }
}

inline Vec identity(const Cones &k)
{
    Vec e = Vec::Zero(k.rows());
    for_each_block(k, [&](int kind, int idx, int off, int len) {
        if (kind == 0)
            e.segment(off, len).setOnes();
        else if (kind == 1)
            e(off) = 1.0;
        else
        {
            const int n = k.psd[idx];
            for (int j = 0; j < n; ++j)
                e(off + svec_index(n, j, j)) = 1.0;
        }
    });
    return e;
}

inline Vec jordan_product(const Cones &k, const Vec &u, const Vec &v)
{
    Vec w(u.size());
    for_each_block(k, [&](int kind, int, int off, int len) {
        if (kind == 0)
            w.segment(off, len) = u.segment(off, len).cwiseProduct(v.segment(off, len));
        else if (kind == 1)
        {
            w(off) = u.segment(off, len).dot(v.segment(off, len));
            w.segment(off + 1, len - 1) = u(off) * v.segment(off + 1, len - 1) + v(off) * u.segment(off + 1, len - 1);
        }
        else
        {
            const Mat U = smat(u.segment(off, len));
            const Mat V = smat(v.segment(off, len));
            w.segment(off, len) = svec(Mat(0.5 * (U * V + V * U)));
        }
    });
    return w;
}

/// Largest alpha with u + alpha * e in K violated, i.e. inf{t : u + t e in K}.
inline double boundary_shift(const Cones &k, const Vec &u)
{
    double t = -std::numeric_limits<double>::infinity();
    for_each_block(k, [&](int kind, int, int off, int len) {
        if (kind == 0)
            t = std::max(t, -u.segment(off, len).minCoeff());
        else if (kind == 1)
            t = std::max(t, u.segment(off + 1, len - 1).norm() - u(off));
        else
            t = std::max(t, -min_eigenvalue(smat(u.segment(off, len))));
    });
    return t;
}

// ---- Nesterov-Todd scaling -------------------------------------------------

struct Scaling
{
    Vec d;                    // orthant: W = diag(d)
    std::vector<Mat> soc_w;   // SOC: W (symmetric)
    std::vector<Mat> soc_wi;  // SOC: W^{-1}
    std::vector<Mat> psd_r;   // PSD: W(X) = R' X R
    std::vector<Mat> psd_ri;  // R^{-1}
    std::vector<Vec> psd_lam; // eigenvalues of the scaled point
    Vec lambda;               // W z = W^{-T} s
};

enum class Op
{
    w,      // W
    wt,     // W^T
    winv,   // W^{-1}
    winv_t, // W^{-T}
};

inline void apply_block(const Scaling &sc, int kind, int idx, Op op, Eigen::Ref<Vec> v, int off)
{
    const int len = static_cast<int>(v.size());
    if (kind == 0)
    {
        if (op == Op::w || op == Op::wt)
            v.array() *= sc.d.segment(off, len).array();
        else
            v.array() /= sc.d.segment(off, len).array();
    }
    else if (kind == 1)
    {
        const Mat &W = (op == Op::w || op == Op::wt) ? sc.soc_w[idx] : sc.soc_wi[idx];
        // both W and W^{-1} are symmetric for the NT scaling of a second-order cone
        v = W * v;
    }
    else
    {
        const Mat X = smat(v);
        const Mat &R = sc.psd_r[idx];
        const Mat &Ri = sc.psd_ri[idx];
        Mat Y;
        switch (op)
        {
        case Op::w:
            Y = R.transpose() * X * R;
            break;
        case Op::wt:
            Y = R * X * R.transpose();
            break;
        case Op::winv:
            Y = Ri.transpose() * X * Ri;
            break;
        case Op::winv_t:
            Y = Ri * X * Ri.transpose();
            break;
        }
        v = svec(Y);
    }
}

inline Vec apply(const Cones &k, const Scaling &sc, Op op, const Vec &u)
{
    Vec v = u;
    for_each_block(k, [&](int kind, int idx, int off, int len) {
        Eigen::Ref<Vec> seg = v.segment(off, len);
        apply_block(sc, kind, idx, op, seg, off);
    });
    return v;
}

inline Mat apply_columns(const Cones &k, const Scaling &sc, Op op, const Mat &M)
{
    Mat out = M;
    for_each_block(k, [&](int kind, int idx, int off, int len) {
        if (kind == 1)
        {
            const Mat &W = (op == Op::w || op == Op::wt) ? sc.soc_w[idx] : sc.soc_wi[idx];
            out.middleRows(off, len) = W * M.middleRows(off, len);
            return;
        }
        for (int j = 0; j < M.cols(); ++j)
        {
            Vec col = M.col(j).segment(off, len);
            apply_block(sc, kind, idx, op, col, off);
            out.col(j).segment(off, len) = col;
        }
    });
    return out;
}

/// Computes the NT scaling of an interior pair (s, z). Returns false when a
/// factorization breaks down.
inline bool compute_scaling(const Cones &k, const Vec &s, const Vec &z, Scaling &sc)
{
    sc = Scaling{};
    sc.d = Vec::Ones(k.nonneg);
    sc.lambda.resize(s.size());
    bool ok = true;
    for_each_block(k, [&](int kind, int idx, int off, int len) {
        if (!ok)
            return;
        if (kind == 0)
        {
            for (int i = 0; i < len; ++i)
            {
                const double si = s(off + i), zi = z(off + i);
                if (!(si > 0.0) || !(zi > 0.0))
                {
                    ok = false;
                    return;
                }
                sc.d(off + i) = std::sqrt(si / zi);
                sc.lambda(off + i) = std::sqrt(si * zi);
            }
        }
        else if (kind == 1)
        {
            const Vec su = s.segment(off, len), zu = z.segment(off, len);
            auto jnorm = [](const Vec &u) {
                const double t = u.tail(u.size() - 1).norm();
                return std::sqrt(std::max((u(0) - t) * (u(0) + t), 0.0));
            };
            const double sn = jnorm(su), zn = jnorm(zu);
            if (!(sn > 0.0) || !(zn > 0.0) || su(0) <= 0.0 || zu(0) <= 0.0)
            {
                ok = false;
                return;
            }
            const Vec sb = su / sn, zb = zu / zn;
            const double gam = std::sqrt(std::max(0.5 * (1.0 + sb.dot(zb)), 0.0));
            Vec wb = sb;
            wb(0) += zb(0);
            wb.tail(len - 1) -= zb.tail(len - 1);
            wb /= 2.0 * gam;
            // wb is the scaling point with wb'J wb = 1; W = beta (2 v v' - J) with v'J v = 1
            Vec v = wb;
            v(0) += 1.0;
            v /= std::sqrt(2.0 * (wb(0) + 1.0));
            const double beta = std::sqrt(sn / zn); // (s'Js / z'Jz)^{1/4}
            Mat J = -Mat::Identity(len, len);
            J(0, 0) = 1.0;
            Mat W = beta * (2.0 * v * v.transpose() - J);
            const Vec Jv = J * v;
            Mat Wi = (2.0 * Jv * Jv.transpose() - J) / beta;
            sc.lambda.segment(off, len) = W * zu;
            sc.soc_w.push_back(std::move(W));
            sc.soc_wi.push_back(std::move(Wi));
        }
        else
        {
            const int n = k.psd[idx];
            Eigen::LLT<Mat> ls(smat(s.segment(off, len)));
            Eigen::LLT<Mat> lz(smat(z.segment(off, len)));
            if (ls.info() != Eigen::Success || lz.info() != Eigen::Success)
            {
                ok = false;
                return;
            }
            const Mat Ls = ls.matrixL();
            const Mat Lz = lz.matrixL();
            Eigen::JacobiSVD<Mat> svd(Lz.transpose() * Ls, Eigen::ComputeFullU | Eigen::ComputeFullV);
            const Vec lam = svd.singularValues();
            if (!(lam.minCoeff() > 0.0))
            {
                ok = false;
                return;
            }
            const Vec isq = lam.cwiseSqrt().cwiseInverse();
            Mat R = Ls * svd.matrixV() * isq.asDiagonal();
            Mat Ri = isq.asDiagonal() * svd.matrixU().transpose() * Lz.transpose();
            Vec lv = Vec::Zero(len);
            for (int j = 0; j < n; ++j)
                lv(svec_index(n, j, j)) = lam(j);
            sc.lambda.segment(off, len) = lv;
            sc.psd_r.push_back(std::move(R));
            sc.psd_ri.push_back(std::move(Ri));
            sc.psd_lam.push_back(lam);
        }
    });
    return ok;
}

/// Solves lambda o u = r for u, with lambda the scaled point.
inline Vec jordan_divide(const Cones &k, const Scaling &sc, const Vec &r)
{
    const Vec &lam = sc.lambda;
    Vec u(r.size());
    for_each_block(k, [&](int kind, int idx, int off, int len) {
        if (kind == 0)
            u.segment(off, len) = r.segment(off, len).cwiseQuotient(lam.segment(off, len));
        else if (kind == 1)
        {
            const double l0 = lam(off);
            const auto l1 = lam.segment(off + 1, len - 1);
            const double r0 = r(off);
            const auto r1 = r.segment(off + 1, len - 1);
            const double den = (l0 - l1.norm()) * (l0 + l1.norm());
            const double u0 = (l0 * r0 - l1.dot(r1)) / den;
            u(off) = u0;
            u.segment(off + 1, len - 1) = (r1 - u0 * l1) / l0;
        }
        else
        {
            const int n = k.psd[idx];
            const Vec &l = sc.psd_lam[idx];
            Mat Rm = smat(r.segment(off, len));
            for (int j = 0; j < n; ++j)
                for (int i = 0; i < n; ++i)
                    Rm(i, j) *= 2.0 / (l(i) + l(j));
            u.segment(off, len) = svec(Rm);
        }
    });
    return u;
}

/// Largest step alpha with lambda + alpha d inside K (infinity if unbounded).
inline double max_step(const Cones &k, const Scaling &sc, const Vec &d)
{
    const Vec &lam = sc.lambda;
    double amax = std::numeric_limits<double>::infinity();
    for_each_block(k, [&](int kind, int idx, int off, int len) {
        if (kind == 0)
        {
            for (int i = 0; i < len; ++i)
                if (d(off + i) < 0.0)
                    amax = std::min(amax, -lam(off + i) / d(off + i));
        }
        else if (kind == 1)
        {
            const double l0 = lam(off), d0 = d(off);
            const auto l1 = lam.segment(off + 1, len - 1);
            const auto d1 = d.segment(off + 1, len - 1);
            const double a = d0 * d0 - d1.squaredNorm();
            const double b = l0 * d0 - l1.dot(d1);
            const double c = (l0 - l1.norm()) * (l0 + l1.norm());
            // smallest positive root of a t^2 + 2 b t + c
            double t = std::numeric_limits<double>::infinity();
            const double disc = b * b - a * c;
            if (std::abs(a) < 1e-300)
            {
                if (b < 0.0)
                    t = -c / (2.0 * b);
            }
            else if (disc >= 0.0)
            {
                const double sq = std::sqrt(disc);
                const double q = -(b + (b >= 0.0 ? sq : -sq));
                for (double root : {q / a, q != 0.0 ? c / q : std::numeric_limits<double>::infinity()})
                    if (root > 0.0)
                        t = std::min(t, root);
            }
            amax = std::min(amax, t);
        }
        else
        {
            const Vec &l = sc.psd_lam[idx];
            const Vec isq = l.cwiseSqrt().cwiseInverse();
            const Mat Mx = isq.asDiagonal() * smat(d.segment(off, len)) * isq.asDiagonal();
            const double e = min_eigenvalue(Mx);
            if (e < 0.0)
                amax = std::min(amax, -1.0 / e);
        }
    });
    return amax;
}

// ---- KKT system ------------------------------------------------------------
//
//   [ 0  A'  G'    ] [ux]   [bx]
//   [ A  0   0     ] [uy] = [by]
//   [ G  0  -W'W   ] [uz]   [bz]

class KktSolver
{
  public:
    KktSolver(const StandardForm &p, const Scaling &sc, int refinement)
        : p_(p), sc_(sc), refinement_(refinement)
    {
        gs_ = apply_columns(p.cones, sc, Op::winv_t, p.G);
        const int n = p.num_vars();
        const int q = static_cast<int>(p.A.rows());
        if (q == 0 && gs_.rows() >= n)
        {
            // H = Gs'Gs = R'R without forming H, which would square the conditioning
            Eigen::HouseholderQR<Mat> qr(gs_);
            r_ = qr.matrixQR().topRows(n).triangularView<Eigen::Upper>();
            const Vec d = r_.diagonal().cwiseAbs();
            use_qr_ = d.minCoeff() > 1e-14 * std::max(1.0, d.maxCoeff());
        }
        if (q == 0 && !use_qr_)
        {
            Mat K = gs_.transpose() * gs_;
            K.diagonal().array() += 1e-13 * std::max(1.0, K.diagonal().maxCoeff());
            lu_.compute(K);
        }
        else if (q > 0)
        {
            const Mat H = gs_.transpose() * gs_;
            Mat K = Mat::Zero(n + q, n + q);
            K.topLeftCorner(n, n) = H;
            K.topRightCorner(n, q) = p.A.transpose();
            K.bottomLeftCorner(q, n) = p.A;
            lu_.compute(K);
        }
    }

    void solve(const Vec &bx, const Vec &by, const Vec &bz, Vec &ux, Vec &uy, Vec &uz) const
    {
        solve_once(bx, by, bz, ux, uy, uz);
        for (int it = 0; it < refinement_; ++it)
        {
            const Vec wz = apply(p_.cones, sc_, Op::w, uz);
            const Vec rx = bx - p_.A.transpose() * uy - p_.G.transpose() * uz;
            const Vec ry = by - p_.A * ux;
            const Vec rz = bz - (p_.G * ux - apply(p_.cones, sc_, Op::wt, wz));
            Vec cx, cy, cz;
            solve_once(rx, ry, rz, cx, cy, cz);
            ux += cx;
            uy += cy;
            uz += cz;
        }
    }

  private:
    void solve_once(const Vec &bx, const Vec &by, const Vec &bz, Vec &ux, Vec &uy, Vec &uz) const
    {
        const Vec t = apply(p_.cones, sc_, Op::winv_t, bz);
        const Vec rhs = bx + gs_.transpose() * t;
        const int n = p_.num_vars();
        const int q = static_cast<int>(p_.A.rows());
        if (q == 0)
        {
            if (use_qr_)
            {
                const Vec w = r_.transpose().triangularView<Eigen::Lower>().solve(rhs);
                ux = r_.triangularView<Eigen::Upper>().solve(w);
            }
            else
                ux = lu_.solve(rhs);
            uy = Vec::Zero(0);
        }
        else
        {
            Vec full(n + q);
            full << rhs, by;
            const Vec sol = lu_.solve(full);
            ux = sol.head(n);
            uy = sol.tail(q);
        }
        uz = apply(p_.cones, sc_, Op::winv, Vec(gs_ * ux - t));
    }

    const StandardForm &p_;
    const Scaling &sc_;
    int refinement_;
    Mat gs_;
    Mat r_;
    Eigen::PartialPivLU<Mat> lu_;
    bool use_qr_ = false;
};

inline bool all_finite(const Vec &v) { return v.allFinite(); }

} // namespace detail

inline RawSolution solve_standard_form(const StandardForm &p, const Settings &settings = {})
{
    using namespace detail;
    const Cones &k = p.cones;
    const int n = p.num_vars();
    const int m = k.rows();
    const int q = static_cast<int>(p.A.rows());
    if (p.G.rows() != m || p.G.cols() != n || p.h.size() != m || p.A.cols() != (q ? n : p.A.cols()) ||
        p.b.size() != q)
        throw std::invalid_argument("solve_standard_form: inconsistent dimensions");

    // dependent equality rows make the KKT system singular; keep an independent
    // subset when the system is consistent, report infeasible otherwise
    if (q > 0)
    {
        Eigen::ColPivHouseholderQR<Mat> qr(p.A.transpose());
        qr.setThreshold(1e-12);
        const int r = static_cast<int>(qr.rank());
        if (r < q)
        {
            StandardForm red = p;
            red.A.resize(r, n);
            red.b.resize(r);
            std::vector<int> keep;
            for (int i = 0; i < r; ++i)
                keep.push_back(qr.colsPermutation().indices()(i));
            std::sort(keep.begin(), keep.end());
            for (int i = 0; i < r; ++i)
            {
                red.A.row(i) = p.A.row(keep[static_cast<std::size_t>(i)]);
                red.b(i) = p.b(keep[static_cast<std::size_t>(i)]);
            }
            const Vec x_ls = red.A.completeOrthogonalDecomposition().solve(red.b);
            if ((p.A * x_ls - p.b).norm() > 1e-9 * std::max(1.0, p.b.norm()))
            {
                RawSolution bad;
                bad.status = Status::infeasible;
                bad.x = Vec::Zero(n);
                bad.y = Vec::Zero(q);
                bad.s = Vec::Zero(m);
                bad.z = Vec::Zero(m);
                return bad;
            }
            RawSolution sol = solve_standard_form(red, settings);
            Vec y = Vec::Zero(q);
            for (int i = 0; i < r && i < sol.y.size(); ++i)
                y(keep[static_cast<std::size_t>(i)]) = sol.y(i);
            sol.y = y;
            return sol;
        }
    }

    const double tol = settings.tol;
    const double resx0 = std::max(1.0, p.c.norm());
    const double resy0 = std::max(1.0, p.b.norm());
    const double resz0 = std::max(1.0, p.h.norm());
    const Vec e = identity(k);
    const double degree = k.degree();

    RawSolution out;

    // starting point: least-norm primal and dual solutions shifted into K
    Vec x, y, z, s;
    {
        Scaling id;
        id.d = Vec::Ones(k.nonneg);
        for (int dim : k.soc)
        {
            id.soc_w.push_back(Mat::Identity(dim, dim));
            id.soc_wi.push_back(Mat::Identity(dim, dim));
        }
        for (int order : k.psd)
        {
            id.psd_r.push_back(Mat::Identity(order, order));
            id.psd_ri.push_back(Mat::Identity(order, order));
            id.psd_lam.push_back(Vec::Ones(order));
        }
        id.lambda = e;
        KktSolver kkt(p, id, settings.refinement_steps);
        Vec ux, uy, uz;
        kkt.solve(Vec::Zero(n), p.b, p.h, ux, uy, uz);
        x = ux;
        s = -uz;
        kkt.solve(-p.c, Vec::Zero(q), Vec::Zero(m), ux, uy, uz);
        y = uy;
        z = uz;
        const double ts = boundary_shift(k, s);
        const double tz = boundary_shift(k, z);
        const double ns = std::max(1.0, s.norm()), nz = std::max(1.0, z.norm());
        if (ts >= -1e-8 * ns)
            s += (1.0 + ts) * e;
        if (tz >= -1e-8 * nz)
            z += (1.0 + tz) * e;
    }
    double tau = 1.0, kappa = 1.0;

    auto finish = [&](Status st, int it) {
        out.status = st;
        out.iterations = it;
        if (st == Status::infeasible)
        {
            const double sc = -(p.h.dot(z) + p.b.dot(y));
            out.x = Vec::Zero(n);
            out.s = Vec::Zero(m);
            out.y = y / sc;
            out.z = z / sc;
        }
        else if (st == Status::unbounded)
        {
            const double sc = -p.c.dot(x);
            out.x = x / sc;
            out.s = s / sc;
            out.y = Vec::Zero(q);
            out.z = Vec::Zero(m);
        }
        else
        {
            out.x = x / tau;
            out.s = s / tau;
            out.y = y / tau;
            out.z = z / tau;
        }
        return out;
    };

    // best iterate by its worst optimality measure; restored if the method stalls
    struct Snapshot
    {
        Vec x, y, z, s;
        double tau = 0.0, score = std::numeric_limits<double>::infinity();
        RawSolution metrics;
        int it = 0;
    } best;
    auto restore_best = [&]() {
        if (!std::isfinite(best.score))
            return;
        x = best.x;
        y = best.y;
        z = best.z;
        s = best.s;
        tau = best.tau;
        out = best.metrics;
    };
    auto give_up = [&](int it) {
        restore_best();
        const bool close = best.score <= 1e3 * tol;
        return finish(close ? Status::inaccurate : Status::iteration_limit, it);
    };

    int stalls = 0;
    for (int it = 0; it <= settings.max_iter; ++it)
    {
        const Vec hrx = -(p.A.transpose() * y + p.G.transpose() * z);
        const Vec hry = p.A * x;
        const Vec hrz = p.G * x + s;
        const Vec rx = -hrx + p.c * tau;    // A'y + G'z + c tau
        const Vec ry = -hry + p.b * tau;    // -A x + b tau
        const Vec rz = -hrz + p.h * tau;    // -G x - s + h tau
        const double cx = p.c.dot(x), by = p.b.dot(y), hz = p.h.dot(z);
        const double rt = -cx - by - hz - kappa;
        const double sz = s.dot(z);
        const double mu = (sz + tau * kappa) / (degree + 1.0);

        out.primal_objective = cx / tau + p.objective_offset;
        out.dual_objective = -(by + hz) / tau + p.objective_offset;
        out.primal_residual = std::max(ry.norm() / tau / resy0, rz.norm() / tau / resz0);
        out.dual_residual = rx.norm() / tau / resx0;
        out.gap = sz / (tau * tau);
        const double pc = cx / tau, dc = -(by + hz) / tau;
        const double denom = std::max(std::abs(pc), std::abs(dc));
        const double relgap = denom > 0.0 ? out.gap / denom : std::numeric_limits<double>::infinity();

        if (settings.log)
            *settings.log << std::setw(3) << it << std::scientific << std::setprecision(3) << "  pcost "
                          << out.primal_objective << "  dcost " << out.dual_objective << "  pres "
                          << out.primal_residual << "  dres " << out.dual_residual << "  gap " << out.gap
                          << "  tau " << tau << "  kappa " << kappa << std::defaultfloat << "\n";

        if (!all_finite(x) || !all_finite(z) || !all_finite(s) || !std::isfinite(tau) ||
            !std::isfinite(out.primal_residual) || !std::isfinite(out.dual_residual))
            return give_up(it);

        const double score = std::max({out.primal_residual, out.dual_residual, std::min(out.gap, relgap)});
        if (score < best.score)
        {
            best.x = x;
            best.y = y;
            best.z = z;
            best.s = s;
            best.tau = tau;
            best.score = score;
            best.metrics = out;
            best.it = it;
        }
        else if (best.score <= 1e3 * tol && (score > 1e2 * best.score || it - best.it >= 5))
            return give_up(it); // lost accuracy after getting close

        if (out.primal_residual <= tol && out.dual_residual <= tol && (out.gap <= tol || relgap <= tol))
            return finish(Status::optimal, it);
        if (hz + by < 0.0 && hrx.norm() / resx0 / (-(hz + by)) <= tol)
            return finish(Status::infeasible, it);
        if (cx < 0.0 && std::max(hry.norm() / resy0, hrz.norm() / resz0) / (-cx) <= tol)
            return finish(Status::unbounded, it);
        if (it == settings.max_iter)
            break;


        Scaling sc;
        if (!compute_scaling(k, s, z, sc))
            return give_up(it);
        KktSolver kkt(p, sc, settings.refinement_steps);

        Vec x1, y1, z1;
        kkt.solve(-p.c, p.b, p.h, x1, y1, z1);
        const double wz1 = apply(k, sc, Op::w, z1).squaredNorm();

        const Vec lam_sq = jordan_product(k, sc.lambda, sc.lambda);
        Vec dsa, dza;
        double dtau_a = 0.0, dkappa_a = 0.0, sigma = 0.0;
        Vec dx, dy, dz, ds_scaled;
        double dtau = 0.0, dkappa = 0.0, alpha = 0.0;

        for (int pass = 0; pass < 2; ++pass)
        {
            const bool predictor = pass == 0;
            const double f = predictor ? 1.0 : 1.0 - sigma;
            Vec rc = -lam_sq;
            double rk = -tau * kappa;
            if (!predictor)
            {
                rc -= jordan_product(k, dsa, dza);
                rc += sigma * mu * e;
                rk += -dtau_a * dkappa_a + sigma * mu;
            }
            const Vec lrc = jordan_divide(k, sc, rc);
            const Vec bz0 = f * rz - apply(k, sc, Op::wt, lrc);
            Vec x0, y0, z0;
            kkt.solve(-f * rx, f * ry, bz0, x0, y0, z0);
            dtau = (-f * rt + p.c.dot(x0) + p.b.dot(y0) + p.h.dot(z0) + rk / tau) / (kappa / tau + wz1);
            dx = x0 + dtau * x1;
            dy = y0 + dtau * y1;
            dz = z0 + dtau * z1;
            dkappa = (rk - kappa * dtau) / tau;
            const Vec dz_scaled = apply(k, sc, Op::w, dz);
            ds_scaled = lrc - dz_scaled;

            double amax = std::min(max_step(k, sc, ds_scaled), max_step(k, sc, dz_scaled));
            if (dtau < 0.0)
                amax = std::min(amax, -tau / dtau);
            if (dkappa < 0.0)
                amax = std::min(amax, -kappa / dkappa);
            if (predictor)
            {
                const double a = std::min(1.0, amax);
                sigma = std::pow(1.0 - a, 3);
                dsa = ds_scaled;
                dza = dz_scaled;
                dtau_a = dtau;
                dkappa_a = dkappa;
            }
            else
                alpha = std::min(1.0, 0.99 * amax);
        }

        if (!(alpha > 1e-14))
        {
            if (++stalls > 2)
                return give_up(it);
            alpha = 1e-14;
        }

        const Vec ds = apply(k, sc, Op::wt, ds_scaled);
        x += alpha * dx;
        y += alpha * dy;
        z += alpha * dz;
        s += alpha * ds;
        tau += alpha * dtau;
        kappa += alpha * dkappa;
    }

    return give_up(settings.max_iter);
}

} // namespace privloc::conic

#endif
