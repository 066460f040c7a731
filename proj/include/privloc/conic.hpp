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
// Small modeling layer on top of the interior-point solver. Problems are
// written with affine matrix expressions over a flat real variable vector;
// memberships (PSD, second-order cone, nonnegative, equality) are collected
// and assembled into standard form on demand.

#ifndef PRIVLOC_CONIC_HPP
#define PRIVLOC_CONIC_HPP

#include <iomanip>
#include <ostream>
#include <string>
#include <vector>

#include "conic_solver.hpp"

namespace privloc::conic
{

// ---- affine expressions --------------------------------------------------

/// Affine map x -> constant + coef * x with the result read as a rows x cols
/// matrix (column-major). The coefficient matrix may have fewer columns than
/// the final program; missing columns are zero.
class Expr
{
  public:
    Expr() = default;

    static Expr constant(const Mat &value)
    {
        Expr e;
        e.rows_ = static_cast<int>(value.rows());
        e.cols_ = static_cast<int>(value.cols());
        e.const_ = Eigen::Map<const Vec>(value.data(), value.size());
        e.coef_ = Mat::Zero(value.size(), 0);
        return e;
    }
    static Expr scalar(double v) { return constant(Mat::Constant(1, 1, v)); }
    static Expr zeros(int rows, int cols) { return constant(Mat::Zero(rows, cols)); }

    /// Linear map with the given column-major coefficient rows acting on
    /// variables [offset, offset + coef.cols()).
    static Expr linear(int rows, int cols, const Mat &coef, int offset)
    {
        if (coef.rows() != rows * cols)
            throw std::invalid_argument("Expr::linear: coefficient rows mismatch");
        Expr e;
        e.rows_ = rows;
        e.cols_ = cols;
        e.const_ = Vec::Zero(rows * cols);
        e.coef_ = Mat::Zero(rows * cols, offset + coef.cols());
        e.coef_.rightCols(coef.cols()) = coef;
        return e;
    }

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    int size() const { return rows_ * cols_; }
    int width() const { return static_cast<int>(coef_.cols()); }
    const Vec &constant_part() const { return const_; }
    const Mat &coefficients() const { return coef_; }

    /// Coefficients padded to n variables.
    Mat coefficients(int n) const
    {
        Mat c = Mat::Zero(size(), n);
        c.leftCols(width()) = coef_;
        return c;
    }

    Mat value(const Vec &x) const
    {
        Vec v = const_;
        if (width() > 0)
            v.noalias() += coef_ * x.head(width());
        return Eigen::Map<const Mat>(v.data(), rows_, cols_);
    }

    Expr operator+(const Expr &o) const { return combine(o, 1.0); }
    Expr operator-(const Expr &o) const { return combine(o, -1.0); }
    Expr operator-() const { return (*this) * -1.0; }
    Expr operator*(double a) const
    {
        Expr e = *this;
        e.const_ *= a;
        e.coef_ *= a;
        return e;
    }
    friend Expr operator*(double a, const Expr &e) { return e * a; }

    /// Constant-matrix product L * this.
    friend Expr operator*(const Mat &L, const Expr &e)
    {
        if (L.cols() != e.rows_)
            throw std::invalid_argument("Expr: left product dimension mismatch");
        Expr out;
        out.rows_ = static_cast<int>(L.rows());
        out.cols_ = e.cols_;
        out.const_.resize(out.size());
        out.coef_.resize(out.size(), e.width());
        for (int j = 0; j < e.cols_; ++j)
        {
            out.const_.segment(j * out.rows_, out.rows_) = L * e.const_.segment(j * e.rows_, e.rows_);
            out.coef_.middleRows(j * out.rows_, out.rows_) = L * e.coef_.middleRows(j * e.rows_, e.rows_);
        }
        return out;
    }

    /// Constant-matrix product this * R.
    Expr operator*(const Mat &R) const { return (R.transpose() * transpose()).transpose(); }

    Expr transpose() const
    {
        Expr out;
        out.rows_ = cols_;
        out.cols_ = rows_;
        out.const_.resize(size());
        out.coef_.resize(size(), width());
        for (int j = 0; j < cols_; ++j)
            for (int i = 0; i < rows_; ++i)
            {
                out.const_(i * cols_ + j) = const_(j * rows_ + i);
                out.coef_.row(i * cols_ + j) = coef_.row(j * rows_ + i);
            }
        return out;
    }

    Expr block(int i0, int j0, int nr, int nc) const
    {
        if (i0 < 0 || j0 < 0 || i0 + nr > rows_ || j0 + nc > cols_)
            throw std::out_of_range("Expr::block");
        Expr out;
        out.rows_ = nr;
        out.cols_ = nc;
        out.const_.resize(nr * nc);
        out.coef_.resize(nr * nc, width());
        for (int j = 0; j < nc; ++j)
        {
            out.const_.segment(j * nr, nr) = const_.segment((j0 + j) * rows_ + i0, nr);
            out.coef_.middleRows(j * nr, nr) = coef_.middleRows((j0 + j) * rows_ + i0, nr);
        }
        return out;
    }

    Expr entry(int i, int j) const { return block(i, j, 1, 1); }

    /// Column-major vectorization as a size() x 1 expression.
    Expr vec() const
    {
        Expr out = *this;
        out.rows_ = size();
        out.cols_ = 1;
        return out;
    }

    Expr trace() const
    {
        if (rows_ != cols_)
            throw std::invalid_argument("Expr::trace: not square");
        Expr out;
        out.rows_ = out.cols_ = 1;
        out.const_ = Vec::Zero(1);
        out.coef_ = Mat::Zero(1, width());
        for (int i = 0; i < rows_; ++i)
        {
            out.const_(0) += const_(i * rows_ + i);
            out.coef_.row(0) += coef_.row(i * rows_ + i);
        }
        return out;
    }

    /// Block matrix from a grid of expressions with conforming sizes.
    static Expr blocks(const std::vector<std::vector<Expr>> &grid)
    {
        if (grid.empty() || grid[0].empty())
            throw std::invalid_argument("Expr::blocks: empty grid");
        int rows = 0, cols = 0, width = 0;
        for (const auto &row : grid)
        {
            if (row.size() != grid[0].size())
                throw std::invalid_argument("Expr::blocks: ragged grid");
            rows += row[0].rows();
        }
        for (const auto &e : grid[0])
            cols += e.cols();
        for (const auto &row : grid)
            for (const auto &e : row)
                width = std::max(width, e.width());
        Expr out;
        out.rows_ = rows;
        out.cols_ = cols;
        out.const_ = Vec::Zero(rows * cols);
        out.coef_ = Mat::Zero(rows * cols, width);
        int r0 = 0;
        for (std::size_t bi = 0; bi < grid.size(); ++bi)
        {
            int c0 = 0;
            const int nr = grid[bi][0].rows();
            for (std::size_t bj = 0; bj < grid[bi].size(); ++bj)
            {
                const Expr &e = grid[bi][bj];
                if (e.rows() != nr || e.cols() != grid[0][bj].cols())
                    throw std::invalid_argument("Expr::blocks: nonconforming block");
                for (int j = 0; j < e.cols(); ++j)
                {
                    const int dst = (c0 + j) * rows + r0;
                    out.const_.segment(dst, nr) = e.const_.segment(j * nr, nr);
                    out.coef_.block(dst, 0, nr, e.width()) = e.coef_.middleRows(j * nr, nr);
                }
                c0 += e.cols();
            }
            r0 += nr;
        }
        return out;
    }

    /// Vertical stack of column expressions.
    static Expr vstack(const std::vector<Expr> &parts)
    {
        std::vector<std::vector<Expr>> grid;
        for (const auto &p : parts)
            grid.push_back({p});
        return blocks(grid);
    }

  private:
    Expr combine(const Expr &o, double sign) const
    {
        if (o.rows_ != rows_ || o.cols_ != cols_)
            throw std::invalid_argument("Expr: shape mismatch in sum");
        Expr out;
        out.rows_ = rows_;
        out.cols_ = cols_;
        out.const_ = const_ + sign * o.const_;
        out.coef_ = Mat::Zero(size(), std::max(width(), o.width()));
        out.coef_.leftCols(width()) = coef_;
        out.coef_.leftCols(o.width()) += sign * o.coef_;
        return out;
    }

    int rows_ = 0;
    int cols_ = 0;
    Vec const_;
    Mat coef_;
};

// ---- complex <-> real embedding ------------------------------------------
// realify(H) = [Re H, -Im H; Im H, Re H]; for Hermitian H it is symmetric and
// PSD exactly when H is; each eigenvalue of H appears twice.

inline Mat realify(const CMat &h)
{
    const int n = static_cast<int>(h.rows());
    Mat r(2 * n, 2 * n);
    r << h.real(), -h.imag(), h.imag(), h.real();
    return r;
}

inline CMat derealify(const Mat &r)
{
    if (r.rows() != r.cols() || r.rows() % 2 != 0)
        throw std::invalid_argument("derealify: expected an even square matrix");
    const int n = static_cast<int>(r.rows() / 2);
    CMat h(n, n);
    // average the two copies so the result is exact for any symmetric input
    h.real() = 0.5 * (r.topLeftCorner(n, n) + r.bottomRightCorner(n, n));
    h.imag() = 0.5 * (r.bottomLeftCorner(n, n) - r.topRightCorner(n, n));
    return h;
}

// ---- program -------------------------------------------------------------

enum class BlockKind
{
    vector,
    symmetric,
    hermitian
};

struct VarBlock
{
    std::string name;
    BlockKind kind = BlockKind::vector;
    int dim = 0;    // vector length or matrix order
    int offset = 0; // first variable
    int count = 0;  // number of real variables
};

/// A subproblem ended without a usable solution.
class SolverError : public std::runtime_error
{
  public:
    SolverError(Status status, const std::string &context)
        : std::runtime_error(context + ": solver status " + status_name(status)), status_(status)
    {
    }
    Status status() const { return status_; }

  private:
    Status status_;
};

struct SolverReport
{
    Status status = Status::iteration_limit;
    Vec x;
    double objective = 0.0;
    double dual_objective = 0.0;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    double gap = 0.0;
    int iterations = 0;

    bool usable() const { return status == Status::optimal || status == Status::inaccurate; }
};

class ConicProgram
{
  public:
    int num_vars() const { return n_; }
    const std::vector<VarBlock> &variables() const { return blocks_; }
    const VarBlock &variable(int id) const { return blocks_.at(static_cast<std::size_t>(id)); }

    int add_vector(const std::string &name, int n)
    {
        return add_block(name, BlockKind::vector, n, n);
    }

    /// Real symmetric n x n variable, parameterized by svec.
    int add_symmetric(const std::string &name, int n, bool psd = false)
    {
        const int id = add_block(name, BlockKind::symmetric, n, svec_size(n));
        if (psd)
            add_psd(matrix(id));
        return id;
    }

    /// Complex Hermitian n x n variable with the n^2-real parameterization of
    /// hermitian_from_params. With psd the realified matrix is constrained PSD.
    int add_hermitian(const std::string &name, int n, bool psd = false)
    {
        const int id = add_block(name, BlockKind::hermitian, n, hermitian_param_count(n));
        if (psd)
            add_psd(matrix(id));
        return id;
    }

    /// Expression of a variable: a column for vectors, the matrix for symmetric
    /// blocks and the 2n x 2n realified matrix for Hermitian blocks.
    Expr matrix(int id) const
    {
        const VarBlock &b = variable(id);
        switch (b.kind)
        {
        case BlockKind::vector:
            return Expr::linear(b.dim, 1, Mat::Identity(b.dim, b.dim), b.offset);
        case BlockKind::symmetric: {
            const int n = b.dim;
            Mat coef = Mat::Zero(n * n, b.count);
            for (int j = 0; j < n; ++j)
                for (int i = 0; i < n; ++i)
                    coef(j * n + i, svec_index(n, i, j)) = (i == j) ? 1.0 : 1.0 / kSqrt2;
            return Expr::linear(n, n, coef, b.offset);
        }
        case BlockKind::hermitian: {
            const int n = b.dim;
            Mat coef = Mat::Zero(4 * n * n, b.count);
            const int N = 2 * n;
            auto set = [&](int i, int j, int var, double v) { coef(j * N + i, var) += v; };
            for (int q = 0; q < n; ++q)
            {
                set(q, q, q, 1.0);
                set(q + n, q + n, q, 1.0);
            }
            int k = n;
            for (int q = 0; q < n; ++q)
                for (int r = q + 1; r < n; ++r)
                {
                    // Re H(q,r) = Re H(r,q) = x_k;  Im H(q,r) = x_{k+1} = -Im H(r,q)
                    for (auto [i, j] : {std::pair{q, r}, std::pair{r, q}})
                    {
                        set(i, j, k, 1.0);
                        set(i + n, j + n, k, 1.0);
                    }
                    set(q + n, r, k + 1, 1.0);  // Im block, (q,r)
                    set(r + n, q, k + 1, -1.0); // Im block, (r,q)
                    set(q, r + n, k + 1, -1.0); // -Im block, (q,r)
                    set(r, q + n, k + 1, 1.0);  // -Im block, (r,q)
                    k += 2;
                }
            return Expr::linear(N, N, coef, b.offset);
        }
        }
        throw std::logic_error("ConicProgram::matrix");
    }

    /// Raw real variables of a block as a column.
    Expr params(int id) const
    {
        const VarBlock &b = variable(id);
        return Expr::linear(b.count, 1, Mat::Identity(b.count, b.count), b.offset);
    }

    /// Value of a block: vector, symmetric matrix, or realified Hermitian matrix.
    Mat value(int id, const Vec &x) const { return matrix(id).value(x); }

    CMat hermitian_value(int id, const Vec &x) const
    {
        const VarBlock &b = variable(id);
        if (b.kind != BlockKind::hermitian)
            throw std::invalid_argument("hermitian_value: block is not Hermitian");
        return hermitian_from_params(x.segment(b.offset, b.count), b.dim);
    }

    // memberships

    void add_equality(const Expr &e) { eq_.push_back(e.vec()); }
    void add_nonneg(const Expr &e) { nonneg_.push_back(e.vec()); }
    /// e(0) >= || e(1:) ||.
    void add_soc(const Expr &e)
    {
        if (e.size() < 1)
            throw std::invalid_argument("add_soc: empty cone");
        soc_.push_back(e.vec());
    }
    /// Symmetrized e is PSD.
    void add_psd(const Expr &e)
    {
        if (e.rows() != e.cols())
            throw std::invalid_argument("add_psd: matrix must be square");
        psd_.push_back(e);
    }

    void minimize(const Expr &objective)
    {
        if (objective.size() != 1)
            throw std::invalid_argument("minimize: objective must be scalar");
        objective_ = objective;
        has_objective_ = true;
    }

    int num_constraints() const
    {
        return static_cast<int>(eq_.size() + nonneg_.size() + soc_.size() + psd_.size());
    }

    StandardForm standard_form() const
    {
        StandardForm p;
        const int n = n_;
        p.c = Vec::Zero(n);
        if (has_objective_)
        {
            p.c = objective_.coefficients(n).row(0).transpose();
            p.objective_offset = objective_.constant_part()(0);
        }
        int m = 0, q = 0;
        for (const auto &e : nonneg_)
            m += e.size();
        for (const auto &e : soc_)
            m += e.size();
        for (const auto &e : psd_)
            m += svec_size(e.rows());
        for (const auto &e : eq_)
            q += e.size();
        p.G = Mat::Zero(m, n);
        p.h = Vec::Zero(m);
        p.A = Mat::Zero(q, n);
        p.b = Vec::Zero(q);

        // s = h - G x must equal the affine expression, so G = -coef, h = const
        int r = 0;
        auto put = [&](const Vec &c0, const Mat &coef) {
            const int len = static_cast<int>(c0.size());
            p.h.segment(r, len) = c0;
            p.G.middleRows(r, len) = -coef;
            r += len;
        };
        for (const auto &e : nonneg_)
        {
            put(e.constant_part(), e.coefficients(n));
            p.cones.nonneg += e.size();
        }
        for (const auto &e : soc_)
        {
            put(e.constant_part(), e.coefficients(n));
            p.cones.soc.push_back(e.size());
        }
        for (const auto &e : psd_)
        {
            const int k = e.rows();
            const Mat coef = e.coefficients(n);
            const Vec &c0 = e.constant_part();
            Vec sc(svec_size(k));
            Mat sg(svec_size(k), n);
            for (int j = 0; j < k; ++j)
                for (int i = j; i < k; ++i)
                {
                    const int row = svec_index(k, i, j);
                    if (i == j)
                    {
                        sc(row) = c0(j * k + i);
                        sg.row(row) = coef.row(j * k + i);
                    }
                    else
                    {
                        const double w = kSqrt2 * 0.5;
                        sc(row) = w * (c0(j * k + i) + c0(i * k + j));
                        sg.row(row) = w * (coef.row(j * k + i) + coef.row(i * k + j));
                    }
                }
            put(sc, sg);
            p.cones.psd.push_back(k);
        }
        int t = 0;
        for (const auto &e : eq_)
        {
            const int len = e.size();
            p.A.middleRows(t, len) = e.coefficients(n);
            p.b.segment(t, len) = -e.constant_part();
            t += len;
        }
        return p;
    }

    SolverReport solve(const Settings &settings = {}) const
    {
        const StandardForm p = standard_form();
        const RawSolution raw = solve_standard_form(p, settings);
        SolverReport rep;
        rep.status = raw.status;
        rep.x = raw.x;
        rep.objective = raw.primal_objective;
        rep.dual_objective = raw.dual_objective;
        rep.primal_residual = raw.primal_residual;
        rep.dual_residual = raw.dual_residual;
        rep.gap = raw.gap;
        rep.iterations = raw.iterations;
        return rep;
    }

  private:
    int add_block(const std::string &name, BlockKind kind, int dim, int count)
    {
        if (dim <= 0)
            throw std::invalid_argument("ConicProgram: block dimension must be positive");
        blocks_.push_back({name, kind, dim, n_, count});
        n_ += count;
        return static_cast<int>(blocks_.size()) - 1;
    }

    int n_ = 0;
    std::vector<VarBlock> blocks_;
    std::vector<Expr> eq_, nonneg_, soc_, psd_;
    Expr objective_;
    bool has_objective_ = false;
};

// ---- epigraph helpers ----------------------------------------------------

/// tr(U^{-1}) <= tr(T) through [[T, I], [I, U]] PSD. Returns tr(T).
inline Expr epigraph_trace_inverse(ConicProgram &prog, const Expr &U, const std::string &name = "T")
{
    const int n = U.rows();
    const int t = prog.add_symmetric(name, n);
    const Expr T = prog.matrix(t);
    const Expr I = Expr::constant(Mat::Identity(n, n));
    prog.add_psd(Expr::blocks({{T, I}, {I, U}}));
    return T.trace();
}

/// ||e||_F <= t. Returns t.
inline Expr epigraph_frobenius(ConicProgram &prog, const Expr &e, const std::string &name = "t")
{
    const int t = prog.add_vector(name, 1);
    const Expr tv = prog.matrix(t);
    prog.add_soc(Expr::vstack({tv, e.vec()}));
    return tv;
}

/// t^2 <= r through || (r - 1, 2t) || <= r + 1. Returns r.
inline Expr epigraph_square(ConicProgram &prog, const Expr &t, const std::string &name = "r")
{
    const int r = prog.add_vector(name, 1);
    const Expr rv = prog.matrix(r);
    const Expr one = Expr::scalar(1.0);
    prog.add_soc(Expr::vstack({rv + one, rv - one, 2.0 * t}));
    return rv;
}

// ---- text dump -----------------------------------------------------------

/// Sparse listing of a standard-form program: header, cone sizes and the
/// nonzeros of c, G, h, A, b as "name row col value" lines.
inline void dump(std::ostream &os, const StandardForm &p)
{
    os << std::setprecision(17);
    os << "conic-program vars " << p.num_vars() << " rows " << p.G.rows() << " eqs " << p.A.rows() << "\n";
    os << "cone nonneg " << p.cones.nonneg << "\n";
    for (int q : p.cones.soc)
        os << "cone soc " << q << "\n";
    for (int k : p.cones.psd)
        os << "cone psd " << k << "\n";
    os << "offset " << p.objective_offset << "\n";
    auto vec = [&](const char *tag, const Vec &v) {
        for (int i = 0; i < v.size(); ++i)
            if (v(i) != 0.0)
                os << tag << " " << i << " 0 " << v(i) << "\n";
    };
    auto mat = [&](const char *tag, const Mat &m) {
        for (int j = 0; j < m.cols(); ++j)
            for (int i = 0; i < m.rows(); ++i)
                if (m(i, j) != 0.0)
                    os << tag << " " << i << " " << j << " " << m(i, j) << "\n";
    };
    vec("c", p.c);
    mat("G", p.G);
    vec("h", p.h);
    mat("A", p.A);
    vec("b", p.b);
}

} // namespace privloc::conic

#endif
