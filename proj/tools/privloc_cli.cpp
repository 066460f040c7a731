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
// Command-line front end. Exit codes:
//   0 success, 1 usage, 2 configuration, 3 I/O, 4 solver failure, 5 not converged.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>
#include <openssl/evp.h>

#include "privloc/experiments.hpp"

namespace fs = std::filesystem;
using namespace privloc;

namespace
{

constexpr const char *kVersion = "0.1.0";

enum Exit
{
    exit_ok = 0,
    exit_usage = 1,
    exit_config = 2,
    exit_io = 3,
    exit_solver = 4,
    exit_not_converged = 5
};

struct Options
{
    std::string config;
    double sqrt_gamma = 0.0;
    std::vector<double> gamma_list{0.0, 1.0, 4.0, 10.0};
    std::vector<std::string> methods{"proposed", "bench1", "bench2"};
    std::optional<std::uint64_t> seed;
    std::string out = "out";
    int jobs = 1;
    bool verbose = false;
};

std::string sha256_hex(const std::string &data)
{
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("sha256 failed");
    std::ostringstream os;
    for (unsigned int i = 0; i < len; ++i)
        os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
    return os.str();
}

Scenario load(const Options &o)
{
    Scenario s = o.config.empty() ? default_scenario() : load_scenario(o.config);
    if (o.seed)
        s.seed = *o.seed;
    validate(s);
    return s;
}

std::ofstream open_out(const Options &o, const std::string &name, std::vector<std::string> &written)
{
    fs::create_directories(o.out);
    const fs::path p = fs::path(o.out) / name;
    std::ofstream f(p, std::ios::binary);
    if (!f)
        throw std::ios_base::failure("cannot open " + p.string() + " for writing");
    written.push_back(name);
    return f;
}

void write_covariance(std::ostream &os, const CMat &V)
{
    os << "row,col,re,im\n";
    for (int i = 0; i < V.rows(); ++i)
        for (int j = 0; j < V.cols(); ++j)
            os << i << "," << j << "," << detail::fmt_double(V(i, j).real()) << ","
               << detail::fmt_double(V(i, j).imag()) << "\n";
}

nlohmann::json base_manifest(const std::string &command, const Options &o, const Scenario &s,
                             const PddConfig &cfg, int argc, char **argv)
{
    nlohmann::json m;
    m["tool"] = "privloc";
    m["version"] = kVersion;
    m["command"] = command;
    std::vector<std::string> args(argv, argv + argc);
    m["argv"] = args;
    m["config_path"] = o.config;
    m["config_sha256"] = sha256_hex(format_scenario(s));
    m["seed"] = s.seed;
    m["pdd"] = {{"rho0", cfg.rho0},           {"delta", cfg.delta},         {"q", cfg.q},
                {"inner_tol", cfg.inner_tol}, {"inner_max", cfg.inner_max}, {"outer_tol", cfg.outer_tol},
                {"outer_max", cfg.outer_max}, {"solver_tol", cfg.solver_tol}};
    return m;
}

void write_manifest(const Options &o, nlohmann::json m, const std::vector<std::string> &written)
{
    m["outputs"] = written;
    fs::create_directories(o.out);
    std::ofstream f(fs::path(o.out) / "manifest.json", std::ios::binary);
    if (!f)
        throw std::ios_base::failure("cannot write manifest");
    f << m.dump(2) << "\n";
}

int status_of(const std::vector<SweepRecord> &rows)
{
    int code = exit_ok;
    for (const auto &r : rows)
    {
        if (!r.error.empty())
            return exit_solver;
        if (!r.converged)
            code = exit_not_converged;
    }
    return code;
}

nlohmann::json timings(const std::vector<SweepRecord> &rows)
{
    nlohmann::json t = nlohmann::json::array();
    for (const auto &r : rows)
    {
        nlohmann::json e = {{"sqrt_gamma_m", r.sqrt_gamma}, {"method", method_name(r.method)},
                            {"wall_time_s", r.wall_time}};
        if (!r.error.empty())
            e["error"] = r.error;
        t.push_back(e);
    }
    return t;
}

int cmd_solve(const Options &o, int argc, char **argv)
{
    const Scenario s = load(o);
    const PddConfig cfg;
    const SweepContext ctx = make_sweep_context(s, cfg.solver());
    std::ostringstream trace;
    SweepRecord r;
    {
        const auto t0 = std::chrono::steady_clock::now();
        LiftedSolution sol = run_pdd(ctx.problem, o.sqrt_gamma * o.sqrt_gamma, cfg, ctx.bench1_V,
                                     o.verbose ? &std::cerr : nullptr);
        r.sqrt_gamma = o.sqrt_gamma;
        r.method = Method::proposed;
        r.V = sol.V;
        r.bob_sqrt_crb = std::sqrt(sol.bob_crb);
        r.eve_sqrt_crb = std::sqrt(sol.eve_crb);
        r.power_dbm = watt_to_dbm(sol.V.trace().real() * s.M);
        r.converged = sol.converged;
        r.iterations = static_cast<int>(sol.trace.size());
        r.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        write_trace_csv(trace, sol.trace);
    }
    std::vector<std::string> written;
    {
        auto f = open_out(o, "solve.csv", written);
        write_sweep_csv(f, {r});
    }
    open_out(o, "trace.csv", written) << trace.str();
    {
        auto f = open_out(o, "covariance.csv", written);
        write_covariance(f, r.V);
    }
    auto m = base_manifest("solve", o, s, cfg, argc, argv);
    m["sqrt_gamma_m"] = o.sqrt_gamma;
    m["timings"] = timings({r});
    write_manifest(o, m, written);
    write_sweep_csv(std::cout, {r});
    return r.converged ? exit_ok : exit_not_converged;
}

int cmd_sweep(const Options &o, int argc, char **argv, bool bench_only)
{
    const Scenario s = load(o);
    const PddConfig cfg;
    std::vector<Method> methods;
    if (bench_only)
        methods = {Method::bench1, Method::bench2};
    else
        for (const auto &name : o.methods)
            methods.push_back(parse_method(name));
    const SweepContext ctx = make_sweep_context(s, cfg.solver());
    const auto rows = run_sweep(ctx, o.gamma_list, methods, cfg, o.jobs);

    const std::string name = bench_only ? "bench.csv" : "sweep.csv";
    std::vector<std::string> written;
    {
        auto f = open_out(o, name, written);
        write_sweep_csv(f, rows);
    }
    auto m = base_manifest(bench_only ? "bench" : "sweep", o, s, cfg, argc, argv);
    m["sqrt_gamma_list_m"] = o.gamma_list;
    std::vector<std::string> mn;
    for (auto mm : methods)
        mn.emplace_back(method_name(mm));
    m["methods"] = mn;
    m["jobs"] = o.jobs;
    m["timings"] = timings(rows);
    write_manifest(o, m, written);
    write_sweep_csv(std::cout, rows);
    for (const auto &r : rows)
        if (!r.error.empty())
            std::cerr << "error at sqrt_gamma=" << r.sqrt_gamma << " " << method_name(r.method) << ": " << r.error
                      << "\n";
    return status_of(rows);
}

int cmd_beampattern(const Options &o, int argc, char **argv)
{
    const Scenario s = load(o);
    const PddConfig cfg;
    const SweepContext ctx = make_sweep_context(s, cfg.solver());
    const SweepRecord r =
        run_point(ctx, o.sqrt_gamma, Method::proposed, cfg, o.verbose ? &std::cerr : nullptr);
    if (!r.error.empty())
    {
        std::cerr << "solve failed: " << r.error << "\n";
        return exit_solver;
    }
    const Vec grid = beampattern_grid();
    const Vec g = beampattern(r.V, grid);
    std::vector<std::string> written;
    {
        auto f = open_out(o, "beampattern.csv", written);
        write_beampattern_csv(f, grid, g);
    }
    auto m = base_manifest("beampattern", o, s, cfg, argc, argv);
    m["sqrt_gamma_m"] = o.sqrt_gamma;
    m["frame"] = "transmit array, Bob-link orientation";
    m["converged"] = r.converged;
    m["timings"] = timings({r});
    write_manifest(o, m, written);
    if (o.verbose)
        write_beampattern_csv(std::cout, grid, g);
    return r.converged ? exit_ok : exit_not_converged;
}

void add_common(CLI::App *app, Options &o)
{
    app->add_option("--config", o.config, "scenario file (key = value); defaults apply when omitted");
    app->add_option("--seed", o.seed, "override the scenario seed");
    app->add_option("--out", o.out, "output directory")->capture_default_str();
    app->add_flag("--verbose", o.verbose, "print iteration traces to stderr");
}

} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"privloc: location-privacy aware transmit covariance design"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);
    Options o;

    auto *solve = app.add_subcommand("solve", "privacy-constrained design at one threshold");
    add_common(solve, o);
    solve->add_option("--gamma", o.sqrt_gamma, "sqrt of the Eve CRB threshold, m")->capture_default_str();

    auto *sweep = app.add_subcommand("sweep", "threshold sweep over several methods");
    add_common(sweep, o);
    sweep->add_option("--gamma-list", o.gamma_list, "sqrt thresholds, m (comma separated)")
        ->delimiter(',')
        ->capture_default_str();
    sweep->add_option("--methods", o.methods, "proposed, bench1, bench2 (comma separated)")
        ->delimiter(',')
        ->capture_default_str();
    sweep->add_option("--jobs", o.jobs, "worker threads")->check(CLI::PositiveNumber)->capture_default_str();

    auto *beam = app.add_subcommand("beampattern", "normalized transmit beampattern of the design");
    add_common(beam, o);
    beam->add_option("--gamma", o.sqrt_gamma, "sqrt of the Eve CRB threshold, m")->capture_default_str();

    auto *bench = app.add_subcommand("bench", "benchmark designs with power backoff");
    add_common(bench, o);
    bench->add_option("--gamma-list", o.gamma_list, "sqrt thresholds, m (comma separated)")
        ->delimiter(',')
        ->capture_default_str();
    bench->add_option("--jobs", o.jobs, "worker threads")->check(CLI::PositiveNumber)->capture_default_str();

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError &e)
    {
        const int code = app.exit(e);
        return code == 0 ? exit_ok : exit_usage;
    }

    try
    {
        if (!(o.sqrt_gamma >= 0.0) || !std::isfinite(o.sqrt_gamma))
            throw ConfigError("--gamma must be finite and nonnegative");
        if (solve->parsed())
            return cmd_solve(o, argc, argv);
        if (sweep->parsed())
            return cmd_sweep(o, argc, argv, false);
        if (beam->parsed())
            return cmd_beampattern(o, argc, argv);
        if (bench->parsed())
            return cmd_sweep(o, argc, argv, true);
    }
    catch (const ConfigError &e)
    {
        std::cerr << "config error: " << e.what() << "\n";
        return exit_config;
    }
    catch (const GeometryError &e)
    {
        std::cerr << "config error: " << e.what() << "\n";
        return exit_config;
    }
    catch (const std::ios_base::failure &e)
    {
        std::cerr << "I/O error: " << e.what() << "\n";
        return exit_io;
    }
    catch (const fs::filesystem_error &e)
    {
        std::cerr << "I/O error: " << e.what() << "\n";
        return exit_io;
    }
    catch (const conic::SolverError &e)
    {
        std::cerr << "solver failure: " << e.what() << "\n";
        return exit_solver;
    }
    catch (const UnidentifiableError &e)
    {
        std::cerr << "solver failure: " << e.what() << "\n";
        return exit_solver;
    }
    catch (const std::exception &e)
    {
        std::cerr << "error: " << e.what() << "\n";
        return exit_solver;
    }
    return exit_usage;
}
