// Copyright 2026 The qice developers
//
//    Licensed under the Apache License, Version 2.0 (the "License");
//    you may not use this file except in compliance with the License.
//    You may obtain a copy of the License at
//
//        http://www.apache.org/licenses/LICENSE-2.0
//
//    Unless required by applicable law or agreed to in writing, software
//    distributed under the License is distributed on an "AS IS" BASIS,
//    WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
//    See the License for the specific language governing permissions and
//    limitations under the License.

#include "doctest.h"
#include "oracles.hpp"
#include "qice/lattice.hpp"
#include "qice/rng.hpp"

#include <map>

using namespace qice;

namespace {

std::array<Spin, 4> nesw(int n, int e, int s, int w) {
    return {static_cast<Spin>(n), static_cast<Spin>(e), static_cast<Spin>(s), static_cast<Spin>(w)};
}

}  // namespace

TEST_CASE("vertex taxonomy over all sixteen configurations") {
    std::map<VertexType, int> counts;
    for (int mask = 0; mask < 16; ++mask) {
        auto spins = nesw(mask & 1 ? 1 : -1, mask & 2 ? 1 : -1, mask & 4 ? 1 : -1, mask & 8 ? 1 : -1);
        VertexReport rep = classify_vertex(spins, Sublattice::A);
        ++counts[rep.type];
        // |Q| pins the type for charged vertices.
        if (rep.charge == 4 || rep.charge == -4) CHECK(rep.type == VertexType::type_iv);
        if (rep.charge == 2 || rep.charge == -2) CHECK(rep.type == VertexType::type_iii);
        if (rep.type == VertexType::type_i || rep.type == VertexType::type_ii) CHECK(rep.charge == 0);
    }
    CHECK(counts[VertexType::type_i] == 2);
    CHECK(counts[VertexType::type_ii] == 4);
    CHECK(counts[VertexType::type_iii] == 8);
    CHECK(counts[VertexType::type_iv] == 2);
}

TEST_CASE("charge sign convention") {
    VertexReport a = classify_vertex(nesw(1, -1, 1, -1), Sublattice::A);
    CHECK(a.type == VertexType::type_i);
    CHECK(a.charge == 0);

    VertexReport all_in = classify_vertex(nesw(1, 1, 1, 1), Sublattice::A);
    CHECK(all_in.type == VertexType::type_iv);
    CHECK(all_in.charge == 4);

    // Same spins on the B sublattice carry the opposite charge.
    VertexReport b = classify_vertex(nesw(1, 1, 1, 1), Sublattice::B);
    CHECK(b.charge == -4);

    VertexReport three_in = classify_vertex(nesw(1, 1, 1, -1), Sublattice::A);
    CHECK(three_in.type == VertexType::type_iii);
    CHECK(three_in.charge == 2);
}

TEST_CASE("vertex energies reproduce the four levels") {
    CouplingSpec coupling;  // j_par = j_perp = 1

    const auto type_i = nesw(1, -1, 1, -1);
    const auto type_ii = nesw(1, 1, -1, -1);
    const auto type_iii = nesw(1, 1, 1, -1);
    const auto type_iv = nesw(1, 1, 1, 1);

    CHECK(vertex_energy(type_i, coupling) == doctest::Approx(-2.0));    // -4*1 + 2*1
    CHECK(vertex_energy(type_ii, coupling) == doctest::Approx(-2.0));   // -2*1
    CHECK(vertex_energy(type_iii, coupling) == doctest::Approx(0.0));
    CHECK(vertex_energy(type_iv, coupling) == doctest::Approx(6.0));    // 4*1 + 2*1

    CouplingSpec detuned;
    detuned.j_perp = 1.02;
    CHECK(vertex_energy(type_i, detuned) == doctest::Approx(-2.08));
    CHECK(vertex_energy(type_ii, detuned) == doctest::Approx(-2.0));
    // Type-III stays at zero for any couplings.
    CHECK(vertex_energy(type_iii, detuned) == doctest::Approx(0.0));

    // Degeneracy of Type-I and Type-II holds iff j_perp == j_par.
    CHECK(vertex_energy(type_i, coupling) == doctest::Approx(vertex_energy(type_ii, coupling)));
    CHECK(vertex_energy(type_i, detuned) < vertex_energy(type_ii, detuned));
    CouplingSpec detuned_down;
    detuned_down.j_perp = 0.98;
    CHECK(vertex_energy(type_i, detuned_down) > vertex_energy(type_ii, detuned_down));
}

TEST_CASE("energy ordering across the three regimes") {
    for (double ratio : {0.98, 1.0, 1.02}) {
        CouplingSpec coupling;
        coupling.j_perp = ratio;
        const double e1 = vertex_energy(nesw(1, -1, 1, -1), coupling);
        const double e2 = vertex_energy(nesw(1, 1, -1, -1), coupling);
        const double e3 = vertex_energy(nesw(1, 1, 1, -1), coupling);
        const double e4 = vertex_energy(nesw(1, 1, 1, 1), coupling);
        CHECK(e3 < e4);
        CHECK(e2 < e3);
        if (ratio > 1.0) CHECK(e1 < e2);
        if (ratio < 1.0) CHECK(e2 < e1);
    }
}

TEST_CASE("type-I tiling energy on 2x2") {
    IceLattice lattice(2, 2);
    CouplingSpec coupling;
    SpinState state = lattice.type_i_state();
    auto counts = std::array<int, 4>{};
    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 2; ++c) {
            auto rep = vertex_report(state, lattice, r, c, coupling);
            REQUIRE(rep.has_value());
            ++counts[static_cast<std::size_t>(rep->type)];
        }
    CHECK(counts[0] == 4);
    CHECK(total_energy(state, lattice, coupling) == doctest::Approx(-8.0));
}

TEST_CASE("single flip changes energy by the two affected vertices") {
    IceLattice lattice(3, 3);
    CouplingSpec coupling;
    SpinState state = lattice.type_i_state();
    const double base = total_energy(state, lattice, coupling);

    const int site = lattice.h_site(1, 1);  // interior edge, two adjacent vertices
    auto before_w = *vertex_report(state, lattice, 1, 0, coupling);
    auto before_e = *vertex_report(state, lattice, 1, 1, coupling);
    state.at(site) = static_cast<Spin>(-state.at(site));
    auto after_w = *vertex_report(state, lattice, 1, 0, coupling);
    auto after_e = *vertex_report(state, lattice, 1, 1, coupling);

    const double expected_delta = (after_w.energy - before_w.energy) + (after_e.energy - before_e.energy);
    CHECK(total_energy(state, lattice, coupling) - base == doctest::Approx(expected_delta));
}

TEST_CASE("total energy equals the edge-list oracle") {
    Rng rng = make_rng(7);

    SUBCASE("exhaustively on 2x2") {
        IceLattice lattice(2, 2);
        CouplingSpec coupling;
        coupling.j_perp = 1.02;
        oracle::for_each_state(lattice, [&](const SpinState& state) {
            CHECK(total_energy(state, lattice, coupling) ==
                  doctest::Approx(oracle::edge_list_energy(state, lattice, coupling)));
        });
    }

    SUBCASE("random states up to 4x4, with vacancies and fields") {
        for (int size : {3, 4}) {
            std::vector<int> vacancies;
            if (size == 4) vacancies = {5, 17};
            IceLattice lattice(size, size, Topology::open_boundary, vacancies);
            CouplingSpec coupling;
            coupling.j_par = 0.9;
            coupling.j_perp = 1.1;
            coupling.scale = 0.5;
            int field_site = lattice.h_site(0, 0);
            REQUIRE(!lattice.vacant(field_site));
            coupling.fields[field_site] = 0.7;
            for (int trial = 0; trial < 200; ++trial) {
                SpinState state = lattice.random_state(rng);
                CHECK(total_energy(state, lattice, coupling) ==
                      doctest::Approx(oracle::edge_list_energy(state, lattice, coupling)));
            }
        }
    }

    SUBCASE("random states on a torus") {
        IceLattice lattice(4, 4, Topology::torus);
        CouplingSpec coupling;
        for (int trial = 0; trial < 100; ++trial) {
            SpinState state = lattice.random_state(rng);
            CHECK(total_energy(state, lattice, coupling) ==
                  doctest::Approx(oracle::edge_list_energy(state, lattice, coupling)));
        }
    }
}

TEST_CASE("gauss law: total charge equals boundary flux") {
    Rng rng = make_rng(11);

    SUBCASE("open lattice") {
        IceLattice lattice(4, 5);
        for (int trial = 0; trial < 2000; ++trial) {
            SpinState state = lattice.random_state(rng);
            CHECK(charge_map(state, lattice).total_charge() == boundary_flux(state, lattice));
        }
    }

    SUBCASE("with vacancies") {
        IceLattice lattice(5, 5, Topology::open_boundary, {7, 20, 33});
        for (int trial = 0; trial < 2000; ++trial) {
            SpinState state = lattice.random_state(rng);
            CHECK(charge_map(state, lattice).total_charge() == boundary_flux(state, lattice));
        }
    }

    SUBCASE("torus has no boundary and zero net charge") {
        IceLattice lattice(4, 4, Topology::torus);
        CHECK(lattice.boundary_sites().empty());
        for (int trial = 0; trial < 500; ++trial) {
            SpinState state = lattice.random_state(rng);
            CHECK(charge_map(state, lattice).total_charge() == 0);
            CHECK(boundary_flux(state, lattice) == 0);
        }
    }
}

TEST_CASE("type-I tiling has zero charges and zero flux") {
    IceLattice lattice(4, 4);
    SpinState state = lattice.type_i_state();
    ChargeMap charges = charge_map(state, lattice);
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) CHECK(charges.at(r, c) == 0);
    CHECK(boundary_flux(state, lattice) == 0);

    // Flipping one boundary spin moves the flux by exactly 2.
    const int site = lattice.boundary_sites().front();
    state.at(site) = static_cast<Spin>(-state.at(site));
    CHECK(std::abs(boundary_flux(state, lattice)) == 2);
}

TEST_CASE("sublattice labels alternate and interior sites straddle A and B") {
    IceLattice lattice(4, 4);
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) {
            if (c + 1 < 4) CHECK(lattice.sublattice(r, c) != lattice.sublattice(r, c + 1));
            if (r + 1 < 4) CHECK(lattice.sublattice(r, c) != lattice.sublattice(r + 1, c));
        }
    for (int s = 0; s < lattice.site_count(); ++s) {
        auto adj = lattice.adjacent_vertices(s);
        if (adj[0] < 0 || adj[1] < 0) continue;
        CHECK(lattice.vertex_sign(adj[0] / 4, adj[0] % 4) != lattice.vertex_sign(adj[1] / 4, adj[1] % 4));
    }
}

TEST_CASE("vacancies deactivate adjacent vertices and create interior boundaries") {
    const int rows = 5, cols = 5;
    IceLattice plain(rows, cols);
    const int vac = plain.v_site(2, 2);  // north spin of vertex (2,2), south of (1,2)
    IceLattice lattice(rows, cols, Topology::open_boundary, {vac});

    CHECK(!lattice.vertex_active(2, 2));
    CHECK(!lattice.vertex_active(1, 2));
    CHECK(lattice.vertex_active(2, 1));
    CHECK(lattice.active_vertex_count() == rows * cols - 2);

    // The other spins of the deactivated vertices become boundary sites.
    const auto& boundary = lattice.boundary_sites();
    for (int s : lattice.vertex_sites(2, 2)) {
        if (s == vac) continue;
        auto adj = lattice.adjacent_vertices(s);
        int active_adj = 0;
        for (int v : adj)
            if (v >= 0 && lattice.vertex_active(v)) ++active_adj;
        if (active_adj == 1) CHECK(std::find(boundary.begin(), boundary.end(), s) != boundary.end());
    }

    // Inactive vertices contribute nothing: energy equals the oracle,
    // which also skips them.
    Rng rng = make_rng(3);
    CouplingSpec coupling;
    SpinState state = lattice.random_state(rng);
    CHECK(state.at(vac) == 0);
    CHECK(total_energy(state, lattice, coupling) ==
          doctest::Approx(oracle::edge_list_energy(state, lattice, coupling)));

    auto rep = vertex_report(state, lattice, 2, 2, coupling);
    CHECK(!rep.has_value());  // not classifiable
}

TEST_CASE("charge map marks inactive vertices absent") {
    IceLattice lattice(3, 3, Topology::open_boundary, {0});
    Rng rng = make_rng(5);
    SpinState state = lattice.random_state(rng);
    ChargeMap charges = charge_map(state, lattice);
    CHECK(!charges.present(0, 0));
    CHECK(charges.present(2, 2));
}

TEST_CASE("lattice and state serialization round-trips with null vacancies") {
    IceLattice lattice(3, 4, Topology::open_boundary, {2, 9});
    IceLattice reloaded = lattice_from_json(lattice_to_json(lattice));
    CHECK(reloaded.rows() == 3);
    CHECK(reloaded.cols() == 4);
    CHECK(reloaded.vacancies() == lattice.vacancies());

    Rng rng = make_rng(13);
    SpinState state = lattice.random_state(rng);
    std::string json = state_to_json(state, lattice);
    CHECK(json.find("null") != std::string::npos);
    SpinState back = state_from_json(json, lattice);
    CHECK(back.spins == state.spins);

    CHECK_THROWS_AS(state_from_json(R"({"spins": [1, 1]})", lattice), ConfigError);
}

TEST_CASE("configuration errors") {
    CHECK_THROWS_AS(IceLattice(0, 3), ConfigError);
    CHECK_THROWS_AS(IceLattice(3, 3, Topology::torus), ConfigError);  // odd torus breaks bipartiteness
    CHECK_THROWS_AS(IceLattice(2, 2, Topology::open_boundary, {99}), ConfigError);

    CouplingSpec bad;
    bad.j_par = -1.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);

    IceLattice lattice(2, 2, Topology::open_boundary, {0});
    CouplingSpec coupling;
    coupling.fields[0] = 1.0;  // field on the vacant site
    SpinState state = lattice.type_i_state();
    CHECK_THROWS_AS(total_energy(state, lattice, coupling), ConfigError);
}
