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

#ifndef PRIVLOC_EXPERIMENTS_HPP
#define PRIVLOC_EXPERIMENTS_HPP

#include <atomic>
#include <chrono>
#include <exception>
#include <functional>
#include <mutex>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "pdd.hpp"

namespace privloc
{

// ---- records ---------------------------------------------------------------

enum class Method
{
    proposed,
    bench1,
    bench2
};

inline const char *method_name(Method m)
{
    switch (m)
    {
    case Method::proposed:
        return "proposed";
    case Method::bench1:
        return "bench1";
    case Method::bench2:
        return "bench2";
    }
    return "unknown";
}

inline Method parse_method(const std::string &s)
{
    if (s == "proposed")
        return Method::proposed;
    if (s == "bench1")
        return Method::bench1;
    if (s == "bench2")
        return Method::bench2;
    throw ConfigError("unknown method '" + s + "' (expected proposed, bench1 or bench2)");
}

struct SweepRecord
{
    double sqrt_gamma = 0.0; // m
    Method method = Method::proposed;
    double bob_sqrt_crb = 0.0; // m
    double eve_sqrt_crb = 0.0; // m
    double power_dbm = 0.0;    // total over subcarriers
    bool converged = false;
    int iterations = 0;       // outer iterations (0 for benchmarks)
    double wall_time = 0.0;   // s; kept out of the CSV so it stays byte-stable
    std::string error;        // non-empty when the point failed
    CMat V;                   // physical covariance of the point
};

inline const char *sweep_csv_header()
{
    return "sqrt_gamma_m,method,bob_sqrt_crb_m,eve_sqrt_crb_m,power_dbm,converged,iterations";
}

inline void write_sweep_row(std::ostream &os, const SweepRecord &r)
{
    using detail::fmt_double;
    os << fmt_double(r.sqrt_gamma) << "," << method_name(r.method) << "," << fmt_double(r.bob_sqrt_crb) << ","
       << fmt_double(r.eve_sqrt_crb) << "," << fmt_double(r.power_dbm) << "," << (r.converged ? 1 : 0) << ","
       << r.iterations << "\n";
}

inline void write_sweep_csv(std::ostream &os, const std::vector<SweepRecord> &rows)
{
    os << sweep_csv_header() << "\n";
    for (const auto &r : rows)
        write_sweep_row(os, r);
}

inline void write_trace_csv(std::ostream &os, const std::vector<PddTraceRow> &trace)
{
    using detail::fmt_double;
    os << "k,inner,objective,h,rho,bob_crb_m2,eve_crb_m2,step\n";
    for (const auto &t : trace)
        os << t.k << "," << t.inner << "," << fmt_double(t.objective) << "," << fmt_double(t.h) << ","
           << fmt_double(t.rho) << "," << fmt_double(t.bob_crb) << "," << fmt_double(t.eve_crb) << ","
           << (t.dual_step ? "dual" : "penalty") << "\n";
}

// ---- beampatterns --------------------------------------------------------

inline constexpr int kBeampatternPoints = 1024;

/// Uniform grid over the open interval (-pi/2, pi/2), cell midpoints.
inline Vec beampattern_grid(int points = kBeampatternPoints)
{
    Vec th(points);
    for (int i = 0; i < points; ++i)
        th(i) = -kPi / 2.0 + (i + 0.5) * kPi / points;
    return th;
}

inline double grid_step(int points = kBeampatternPoints) { return kPi / points; }

/// a(theta)^H V a(theta) on the grid, unnormalized (W per subcarrier).
inline Vec beampattern_power(const CMat &V, const Vec &grid)
{
    Vec g(grid.size());
    for (int i = 0; i < grid.size(); ++i)
    {
        const CVec a = steering(grid(i), static_cast<int>(V.rows()));
        g(i) = std::max((a.adjoint() * V * a)(0, 0).real(), 0.0);
    }
    return g;
}

/// Pattern scaled to unit maximum.
inline Vec beampattern(const CMat &V, const Vec &grid)
{
    Vec g = beampattern_power(V, grid);
    const double mx = g.maxCoeff();
    if (mx > 0.0)
        g /= mx;
    return g;
}

inline void write_beampattern_csv(std::ostream &os, const Vec &grid, const Vec &g)
{
    using detail::fmt_double;
    os << "theta_rad,gain\n";
    for (int i = 0; i < grid.size(); ++i)
        os << fmt_double(grid(i)) << "," << fmt_double(g(i)) << "\n";
}

/// Indices of strict local maxima (interior points).
inline std::vector<int> local_maxima(const Vec &g)
{
    std::vector<int> idx;
    for (int i = 1; i + 1 < g.size(); ++i)
        if (g(i) > g(i - 1) && g(i) >= g(i + 1))
            idx.push_back(i);
    return idx;
}

/// Sum of the unnormalized pattern over grid points within half_width of center.
inline double cone_power(const Vec &grid, const Vec &power, double center, double half_width)
{
    double acc = 0.0;
    for (int i = 0; i < grid.size(); ++i)
        if (std::abs(grid(i) - center) <= half_width)
            acc += power(i);
    return acc;
}

// ---- sweeps ----------------------------------------------------------------

/// Runs fn(i) for i in [0, n) on up to `jobs` threads. Exceptions are
/// rethrown after all workers finish (first by index).
inline void parallel_for(int n, int jobs, const std::function<void(int)> &fn)
{
    jobs = std::max(1, std::min(jobs, n));
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
    std::atomic<int> next{0};
    auto worker = [&]() {
        for (int i = next++; i < n; i = next++)
        {
            try
            {
                fn(i);
            }
            catch (...)
            {
                errors[static_cast<std::size_t>(i)] = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (int j = 1; j < jobs; ++j)
        pool.emplace_back(worker);
    worker();
    for (auto &t : pool)
        t.join();
    for (auto &e : errors)
        if (e)
            std::rethrow_exception(e);
}

struct SweepContext
{
    LiftedProblem problem;
    CMat bench1_V;  // unconstrained Bob-CRB minimizer, full power
    CMat bench2_V;  // codebook design, full power
};

inline SweepContext make_sweep_context(const Scenario &s, const conic::Settings &settings = {})
{
    SweepContext ctx;
    ctx.problem = build_lifted_problem(s);
    ctx.bench1_V = crb_min_unconstrained(ctx.problem, settings);
    ctx.bench2_V = codebook_power_allocation(ctx.problem, settings).V;
    return ctx;
}

/// One (sqrt_gamma, method) point. Solver failures are recorded, not thrown.
inline SweepRecord run_point(const SweepContext &ctx, double sqrt_gamma, Method method, const PddConfig &cfg,
                             std::ostream *trace = nullptr)
{
    const auto t0 = std::chrono::steady_clock::now();
    SweepRecord r;
    r.sqrt_gamma = sqrt_gamma;
    r.method = method;
    const double gamma = sqrt_gamma * sqrt_gamma;
    const LiftedProblem &lp = ctx.problem;
    try
    {
        if (method == Method::proposed)
        {
            const LiftedSolution sol = run_pdd(lp, gamma, cfg, ctx.bench1_V, trace);
            r.V = sol.V;
            r.bob_sqrt_crb = std::sqrt(sol.bob_crb);
            r.eve_sqrt_crb = std::sqrt(sol.eve_crb);
            r.power_dbm = watt_to_dbm(sol.V.trace().real() * lp.scenario.M);
            r.converged = sol.converged;
            r.iterations = static_cast<int>(sol.trace.size());
        }
        else
        {
            const BenchmarkResult b =
                power_backoff(method == Method::bench1 ? ctx.bench1_V : ctx.bench2_V, gamma, lp);
            r.V = b.V;
            r.bob_sqrt_crb = std::sqrt(b.bob_crb);
            r.eve_sqrt_crb = std::sqrt(b.eve_crb);
            r.power_dbm = watt_to_dbm(b.power_used);
            r.converged = true;
        }
    }
    catch (const std::exception &e)
    {
        r.error = e.what();
        r.converged = false;
    }
    r.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

/// All (gamma, method) points in gamma-major order, independent of `jobs`.
inline std::vector<SweepRecord> run_sweep(const SweepContext &ctx, const std::vector<double> &sqrt_gammas,
                                          const std::vector<Method> &methods, const PddConfig &cfg, int jobs = 1)
{
    if (sqrt_gammas.empty() || methods.empty())
        throw ConfigError("sweep: gamma list and method list must be nonempty");
    for (double g : sqrt_gammas)
        if (!(g >= 0.0) || !std::isfinite(g))
            throw ConfigError("sweep: sqrt(gamma) values must be finite and nonnegative");
    const int nm = static_cast<int>(methods.size());
    const int n = static_cast<int>(sqrt_gammas.size()) * nm;
    std::vector<SweepRecord> rows(static_cast<std::size_t>(n));
    parallel_for(n, jobs, [&](int i) {
        rows[static_cast<std::size_t>(i)] = run_point(ctx, sqrt_gammas[i / nm], methods[i % nm], cfg);
    });
    return rows;
}

} // namespace privloc

#endif
