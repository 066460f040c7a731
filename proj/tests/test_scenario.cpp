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

#include <sstream>

#include "privloc/scenario.hpp"

// Covered tests:
// - dBm conversion
// - Derived constants of the default scenario
// - Default geometry and sizes
// - Path phase determinism and distribution
// - Config parsing, formatting and rejection of bad input

using namespace privloc;
using Catch::Matchers::WithinRel;
using Catch::Matchers::WithinAbs;

TEST_CASE("Scenario - dBm conversion")
{
    CHECK_THAT(dbm_to_watt(-20.0), WithinRel(1e-5, 1e-14));
    CHECK_THAT(dbm_to_watt(0.0), WithinRel(1e-3, 1e-14));
    CHECK_THAT(dbm_to_watt(-173.855), WithinRel(4.116233473027648e-21, 1e-12));
    CHECK_THAT(watt_to_dbm(dbm_to_watt(-37.5)), WithinAbs(-37.5, 1e-12));
}

TEST_CASE("Scenario - Derived constants")
{
    const Scenario s = default_scenario();
    const DerivedConstants d = derive_constants(s);
    CHECK(d.delta_f == 117187.5);
    CHECK_THAT(d.lambda, WithinRel(0.0107068735, 1e-12));
    CHECK_THAT(d.sigma2, WithinRel(4.8237111012042745e-15, 1e-12));
    CHECK_THAT(d.P_lin, WithinRel(1e-5, 1e-14));
    CHECK_THAT(d.power_cap, WithinRel(1e-5 / 1024.0, 1e-14));

    Scenario bad = s;
    bad.bandwidth = 0.0;
    CHECK_THROWS_AS(derive_constants(bad), ConfigError);
    bad = s;
    bad.M = 0;
    CHECK_THROWS_AS(derive_constants(bad), ConfigError);
}

TEST_CASE("Scenario - Default geometry")
{
    const Scenario s = default_scenario();
    CHECK(s.p_E == Vec2(4.0, 20.0));
    CHECK(s.num_scatterers() == 2);
    CHECK(s.L == 16);
    CHECK(s.antennas_A == 16);
    CHECK_NOTHROW(validate(s));
}

TEST_CASE("Scenario - Path phases")
{
    Scenario s = default_scenario();
    const auto a = draw_path_phases(s, Link::bob);
    CHECK(a == draw_path_phases(s, Link::bob));
    CHECK(a.size() == 3);
    CHECK(a != draw_path_phases(s, Link::eve));
    s.seed = 2;
    CHECK(a != draw_path_phases(s, Link::bob));

    // Monte-Carlo mean of U[0, 2pi) over 1e5 draws
    double sum = 0.0;
    int count = 0;
    s.scatterers.assign(9, Vec2(1.0, 1.0));
    for (std::uint64_t seed = 0; count < 100000; ++seed)
    {
        s.seed = seed;
        for (double w : draw_path_phases(s, Link::bob))
        {
            REQUIRE(w >= 0.0);
            REQUIRE(w < 2.0 * kPi);
            sum += w;
            ++count;
        }
    }
    CHECK_THAT(sum / count, WithinAbs(kPi, 0.02));
}

TEST_CASE("Scenario - Config round trip")
{
    Scenario s = default_scenario();
    s.seed = 7;
    s.scatterers.push_back(Vec2(3.25, -8.0));
    s.phi_E = 0.123456789012345;
    std::istringstream in(format_scenario(s));
    const Scenario t = parse_scenario(in);
    CHECK(t == s);

    std::istringstream partial("# comment\nM = 128   # fewer subcarriers\nseed = 3\n");
    const Scenario u = parse_scenario(partial);
    CHECK(u.M == 128);
    CHECK(u.seed == 3);
    CHECK(u.p_B == default_scenario().p_B);
}

TEST_CASE("Scenario - Config errors")
{
    auto parse = [](const std::string &text) {
        std::istringstream in(text);
        return parse_scenario(in);
    };
    CHECK_THROWS_AS(parse("bogus = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse("M = 4\nM = 8\n"), ConfigError);
    CHECK_THROWS_AS(parse("M = abc\n"), ConfigError);
    CHECK_THROWS_AS(parse("M_A = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse("bandwidth = -1\n"), ConfigError);
    CHECK_THROWS_AS(parse("seed = -3\n"), ConfigError);
    CHECK_THROWS_AS(parse("M only\n"), ConfigError);
    CHECK_THROWS_AS(parse("scatterers = 0 0\n"), GeometryError);
    CHECK_THROWS_AS(parse("p_B = 0 0\n"), GeometryError);
    CHECK_THROWS_AS(load_scenario("/nonexistent/privloc.cfg"), std::ios_base::failure);
}
