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

#ifndef PRIVLOC_SCENARIO_HPP
#define PRIVLOC_SCENARIO_HPP

#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "linalg.hpp"

namespace privloc
{

inline constexpr double kSpeedOfLight = 299792458.0;

/// Which receiver a quantity refers to: the legitimate base station or the eavesdropper.
enum class Link
{
    bob,
    eve
};

inline const char *link_name(Link l) { return l == Link::bob ? "bob" : "eve"; }

class ConfigError : public std::runtime_error
{
  public:
    explicit ConfigError(const std::string &what) : std::runtime_error(what) {}
};

class GeometryError : public std::runtime_error
{
  public:
    explicit GeometryError(const std::string &what) : std::runtime_error(what) {}
};

/// Experiment configuration. Positions are 2-D, in metres.
struct Scenario
{
    Vec2 p_A{0.0, 0.0};
    Vec2 p_B{-5.0, 20.0};
    Vec2 p_E{4.0, 20.0};
    std::vector<Vec2> scatterers{Vec2(-10.0, 15.0), Vec2(5.0, 15.0)};
    int antennas_A = 16;
    int antennas_B = 16;
    int antennas_E = 16;
    double P_dbm = -20.0;
    double f_c = 28e9;
    double bandwidth = 120e6;
    int M = 1024; // subcarriers
    int N = 100;  // pilot symbols per slot
    int L = 16;   // slots
    double noise_figure_db = 10.0;
    double N0_dbm_hz = -173.855;
    double dt_B = 1e-6;
    double dt_E = 1e-6;
    double phi_B = 110.0 * kPi / 180.0;
    double phi_E = 200.0 * kPi / 180.0;
    double sigma_rcs = 100.0;
    std::uint64_t seed = 1;

    int num_scatterers() const { return static_cast<int>(scatterers.size()); }
    const Vec2 &receiver(Link l) const { return l == Link::bob ? p_B : p_E; }
    int receiver_antennas(Link l) const { return l == Link::bob ? antennas_B : antennas_E; }
    double clock_bias(Link l) const { return l == Link::bob ? dt_B : dt_E; }
    double orientation(Link l) const { return l == Link::bob ? phi_B : phi_E; }

    bool operator==(const Scenario &o) const
    {
        return p_A == o.p_A && p_B == o.p_B && p_E == o.p_E && scatterers == o.scatterers && antennas_A == o.antennas_A &&
               antennas_B == o.antennas_B && antennas_E == o.antennas_E && P_dbm == o.P_dbm && f_c == o.f_c && bandwidth == o.bandwidth &&
               M == o.M && N == o.N && L == o.L && noise_figure_db == o.noise_figure_db &&
               N0_dbm_hz == o.N0_dbm_hz && dt_B == o.dt_B && dt_E == o.dt_E && phi_B == o.phi_B &&
               phi_E == o.phi_E && sigma_rcs == o.sigma_rcs && seed == o.seed;
    }
};

struct DerivedConstants
{
    double lambda = 0.0;    // m
    double delta_f = 0.0;   // Hz
    double sigma2 = 0.0;    // W
    double P_lin = 0.0;     // W
    double power_cap = 0.0; // W, per-subcarrier trace cap P_lin / M
};

inline double dbm_to_watt(double x_dbm) { return std::pow(10.0, (x_dbm - 30.0) / 10.0); }

inline double watt_to_dbm(double w) { return 10.0 * std::log10(w) + 30.0; }

inline double db_to_linear(double x_db) { return std::pow(10.0, x_db / 10.0); }

/// Throws ConfigError / GeometryError describing the first violated invariant.
inline void validate(const Scenario &s)
{
    auto finite2 = [](const Vec2 &p) { return std::isfinite(p.x()) && std::isfinite(p.y()); };
    if (s.antennas_A < 2 || s.antennas_B < 2 || s.antennas_E < 2)
        throw ConfigError("antenna counts M_A, M_B, M_E must be >= 2");
    if (s.M < 1 || s.N < 1 || s.L < 1)
        throw ConfigError("M, N and L must be >= 1");
    if (!(s.bandwidth > 0.0) || !std::isfinite(s.bandwidth))
        throw ConfigError("bandwidth must be positive");
    if (!(s.f_c > 0.0) || !std::isfinite(s.f_c))
        throw ConfigError("f_c must be positive");
    if (!std::isfinite(s.P_dbm) || !std::isfinite(s.noise_figure_db) || !std::isfinite(s.N0_dbm_hz))
        throw ConfigError("power and noise constants must be finite");
    if (!std::isfinite(s.dt_B) || !std::isfinite(s.dt_E) || !std::isfinite(s.phi_B) || !std::isfinite(s.phi_E))
        throw ConfigError("clock biases and orientations must be finite");
    if (!(s.sigma_rcs > 0.0) || !std::isfinite(s.sigma_rcs))
        throw ConfigError("sigma_rcs must be positive");
    if (!finite2(s.p_A) || !finite2(s.p_B) || !finite2(s.p_E))
        throw GeometryError("node positions must be finite");
    constexpr double min_sep = 1e-9;
    if ((s.p_A - s.p_B).norm() <= min_sep || (s.p_A - s.p_E).norm() <= min_sep)
        throw GeometryError("transmitter coincides with a receiver");
    for (std::size_t k = 0; k < s.scatterers.size(); ++k)
    {
        const Vec2 &p = s.scatterers[k];
        if (!finite2(p))
            throw GeometryError("scatterer " + std::to_string(k + 1) + " has a non-finite position");
        if ((p - s.p_A).norm() <= min_sep || (p - s.p_B).norm() <= min_sep || (p - s.p_E).norm() <= min_sep)
            throw GeometryError("scatterer " + std::to_string(k + 1) + " coincides with a node");
    }
}

inline DerivedConstants derive_constants(const Scenario &s)
{
    if (!(s.bandwidth > 0.0))
        throw ConfigError("bandwidth must be positive");
    if (s.M < 1)
        throw ConfigError("subcarrier count M must be >= 1");
    if (!(s.f_c > 0.0))
        throw ConfigError("f_c must be positive");
    DerivedConstants d;
    d.lambda = kSpeedOfLight / s.f_c;
    d.delta_f = s.bandwidth / s.M;
    d.sigma2 = db_to_linear(s.noise_figure_db) * dbm_to_watt(s.N0_dbm_hz) * d.delta_f;
    d.P_lin = dbm_to_watt(s.P_dbm);
    d.power_cap = d.P_lin / s.M;
    return d;
}

inline Scenario default_scenario() { return Scenario{}; }

/// Uniform phases in [0, 2pi) for the LOS path and every scatterer path of one link.
/// Each link draws from its own substream of the scenario seed.
inline std::vector<double> draw_path_phases(const Scenario &s, Link link)
{
    // splitmix64 stream whose start state is a hash of (seed, link); portable
    // across standard libraries, unlike std::uniform_real_distribution
    auto mix = [](std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    };
    const std::uint64_t tag = link == Link::bob ? 0x426F62ULL : 0x457665ULL;
    std::uint64_t state = mix(s.seed ^ mix(tag + 0x9E3779B97F4A7C15ULL));
    auto next = [&state, &mix]() { return mix(state += 0x9E3779B97F4A7C15ULL); };
    std::vector<double> out(s.scatterers.size() + 1);
    for (double &w : out)
    {
        const double u = static_cast<double>(next() >> 11) * 0x1.0p-53;
        w = 2.0 * kPi * u;
        if (w >= 2.0 * kPi) // rounding guard
            w = 0.0;
    }
    return out;
}

// ---- config file -----------------------------------------------------------
//
// Flat "key = value" text. '#' starts a comment. Vectors are written as
// "x y"; the scatterer list is "x1 y1; x2 y2; ...". Unknown keys, duplicate
// keys and malformed values are errors.

namespace detail
{

inline std::string fmt_double(double v)
{
    char buf[64];
    auto r = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, r.ptr);
}

inline std::string trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

inline std::vector<double> parse_numbers(const std::string &key, const std::string &text)
{
    std::vector<double> out;
    std::istringstream is(text);
    std::string tok;
    while (is >> tok)
    {
        double v = 0.0;
        auto r = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (r.ec != std::errc() || r.ptr != tok.data() + tok.size())
            throw ConfigError("config key '" + key + "': cannot parse number '" + tok + "'");
        out.push_back(v);
    }
    return out;
}

inline double parse_scalar(const std::string &key, const std::string &text)
{
    auto v = parse_numbers(key, text);
    if (v.size() != 1)
        throw ConfigError("config key '" + key + "': expected one number");
    return v[0];
}

inline int parse_int(const std::string &key, const std::string &text)
{
    const double v = parse_scalar(key, text);
    if (v != std::floor(v) || std::abs(v) > 1e9)
        throw ConfigError("config key '" + key + "': expected an integer");
    return static_cast<int>(v);
}

inline Vec2 parse_vec2(const std::string &key, const std::string &text)
{
    auto v = parse_numbers(key, text);
    if (v.size() != 2)
        throw ConfigError("config key '" + key + "': expected two numbers");
    return Vec2(v[0], v[1]);
}

} // namespace detail

inline Scenario parse_scenario(std::istream &in)
{
    Scenario s;
    std::map<std::string, std::string> seen;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line))
    {
        ++lineno;
        if (auto h = line.find('#'); h != std::string::npos)
            line.erase(h);
        const std::string t = detail::trim(line);
        if (t.empty())
            continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
        const std::string key = detail::trim(std::string_view(t).substr(0, eq));
        const std::string val = detail::trim(std::string_view(t).substr(eq + 1));
        if (seen.count(key))
            throw ConfigError("config key '" + key + "' given twice");
        seen[key] = val;

        using namespace detail;
        if (key == "p_A")
            s.p_A = parse_vec2(key, val);
        else if (key == "p_B")
            s.p_B = parse_vec2(key, val);
        else if (key == "p_E")
            s.p_E = parse_vec2(key, val);
        else if (key == "scatterers")
        {
            s.scatterers.clear();
            std::istringstream is(val);
            std::string item;
            while (std::getline(is, item, ';'))
                if (!trim(item).empty())
                    s.scatterers.push_back(parse_vec2(key, item));
        }
        else if (key == "M_A")
            s.antennas_A = parse_int(key, val);
        else if (key == "M_B")
            s.antennas_B = parse_int(key, val);
        else if (key == "M_E")
            s.antennas_E = parse_int(key, val);
        else if (key == "P_dbm")
            s.P_dbm = parse_scalar(key, val);
        else if (key == "f_c")
            s.f_c = parse_scalar(key, val);
        else if (key == "bandwidth")
            s.bandwidth = parse_scalar(key, val);
        else if (key == "M")
            s.M = parse_int(key, val);
        else if (key == "N")
            s.N = parse_int(key, val);
        else if (key == "L")
            s.L = parse_int(key, val);
        else if (key == "noise_figure_db")
            s.noise_figure_db = parse_scalar(key, val);
        else if (key == "N0_dbm_hz")
            s.N0_dbm_hz = parse_scalar(key, val);
        else if (key == "dt_B")
            s.dt_B = parse_scalar(key, val);
        else if (key == "dt_E")
            s.dt_E = parse_scalar(key, val);
        else if (key == "phi_B")
            s.phi_B = parse_scalar(key, val);
        else if (key == "phi_E")
            s.phi_E = parse_scalar(key, val);
        else if (key == "sigma_rcs")
            s.sigma_rcs = parse_scalar(key, val);
        else if (key == "seed")
        {
            const double v = parse_scalar(key, val);
            if (v < 0 || v != std::floor(v) || v > 9.007199254740992e15)
                throw ConfigError("config key 'seed': expected a non-negative integer");
            s.seed = static_cast<std::uint64_t>(v);
        }
        else
            throw ConfigError("unknown config key '" + key + "'");
    }
    validate(s);
    return s;
}

inline Scenario load_scenario(const std::string &path)
{
    std::ifstream f(path);
    if (!f)
        throw std::ios_base::failure("cannot open config file '" + path + "'");
    return parse_scenario(f);
}

inline std::string format_scenario(const Scenario &s)
{
    using detail::fmt_double;
    std::ostringstream o;
    auto v2 = [](const Vec2 &p) { return fmt_double(p.x()) + " " + fmt_double(p.y()); };
    o << "p_A = " << v2(s.p_A) << "\n";
    o << "p_B = " << v2(s.p_B) << "\n";
    o << "p_E = " << v2(s.p_E) << "\n";
    o << "scatterers = ";
    for (std::size_t k = 0; k < s.scatterers.size(); ++k)
        o << (k ? "; " : "") << v2(s.scatterers[k]);
    o << "\n";
    o << "M_A = " << s.antennas_A << "\n";
    o << "M_B = " << s.antennas_B << "\n";
    o << "M_E = " << s.antennas_E << "\n";
    o << "P_dbm = " << fmt_double(s.P_dbm) << "\n";
    o << "f_c = " << fmt_double(s.f_c) << "\n";
    o << "bandwidth = " << fmt_double(s.bandwidth) << "\n";
    o << "M = " << s.M << "\n";
    o << "N = " << s.N << "\n";
    o << "L = " << s.L << "\n";
    o << "noise_figure_db = " << fmt_double(s.noise_figure_db) << "\n";
    o << "N0_dbm_hz = " << fmt_double(s.N0_dbm_hz) << "\n";
    o << "dt_B = " << fmt_double(s.dt_B) << "\n";
    o << "dt_E = " << fmt_double(s.dt_E) << "\n";
    o << "phi_B = " << fmt_double(s.phi_B) << "\n";
    o << "phi_E = " << fmt_double(s.phi_E) << "\n";
    o << "sigma_rcs = " << fmt_double(s.sigma_rcs) << "\n";
    o << "seed = " << s.seed << "\n";
    return o.str();
}

} // namespace privloc

#endif
