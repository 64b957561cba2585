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

#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "qice/pinning.hpp"

using namespace qice;

namespace {

// Vertex energy plus field energy of one pinned-vertex configuration.
double pinned_vertex_energy(const std::array<Spin, 4>& spins, const std::array<int, 4>& sites,
                            const CouplingSpec& coupling, const std::unordered_map<int, double>& fields) {
    double e = vertex_energy(spins, coupling);
    for (int i = 0; i < 4; ++i) e += fields.at(sites[static_cast<std::size_t>(i)]) * spins[static_cast<std::size_t>(i)];
    return e;
}

}  // namespace

TEST_CASE("zero-flux clamp freezes every boundary site to the type-I background") {
    IceLattice lattice(4, 4);
    PinPlan plan = clamp_boundary(lattice);
    CHECK(plan.frozen.size() == lattice.boundary_sites().size());
    CHECK(plan.fields.empty());
    for (int s : lattice.boundary_sites()) {
        REQUIRE(plan.frozen_site(s));
        CHECK(plan.frozen.at(s) == clamp_reference(lattice, s));
    }

    // Applying the clamp to the reference tiling keeps zero flux; the
    // clamp pattern alone fixes the flux for every compatible state.
    SpinState state = lattice.type_i_state();
    for (const auto& [site, spin] : plan.frozen) state.at(site) = spin;
    CHECK(boundary_flux(state, lattice) == 0);
}

TEST_CASE("vacancy-induced interior boundaries are clamped too") {
    IceLattice plain(5, 5);
    const int vac = plain.v_site(2, 2);
    IceLattice lattice(5, 5, Topology::open_boundary, {vac});
    PinPlan plan = clamp_boundary(lattice);
    for (int s : lattice.boundary_sites()) CHECK(plan.frozen_site(s));
    // Interior boundary sites exist around the vacancy.
    bool found_interior = false;
    for (int s : lattice.boundary_sites()) {
        Position p = lattice.position(s);
        if (p.x > 0.6 && p.x < 3.4 && p.y > 0.6 && p.y < 3.4) found_interior = true;
    }
    CHECK(found_interior);
}

TEST_CASE("flux injection flips exactly one boundary site") {
    IceLattice lattice(4, 4);
    Rng rng = make_rng(21);

    SUBCASE("random flip site") {
        PinPlan plan = clamp_boundary(lattice, true, -1, &rng);
        REQUIRE(plan.flipped_site >= 0);
        SpinState state = lattice.type_i_state();
        for (const auto& [site, spin] : plan.frozen) state.at(site) = spin;
        CHECK(std::abs(boundary_flux(state, lattice)) == 2);
    }

    SUBCASE("chosen flip site") {
        const int site = lattice.boundary_sites()[3];
        PinPlan plan = clamp_boundary(lattice, true, site, nullptr);
        CHECK(plan.flipped_site == site);
        CHECK(plan.frozen.at(site) == -clamp_reference(lattice, site));
    }

    SUBCASE("non-boundary flip site rejected") {
        const int interior = lattice.h_site(1, 2);
        CHECK_THROWS_AS(clamp_boundary(lattice, true, interior, nullptr), ConfigError);
    }
}

TEST_CASE("torus has no boundary to clamp") {
    IceLattice lattice(4, 4, Topology::torus);
    CHECK_THROWS_AS(clamp_boundary(lattice), ConfigError);
}

TEST_CASE("pin fields make the four charge +2 type-III states degenerate minima") {
    IceLattice lattice(5, 5);
    CouplingSpec coupling;
    const int r = 2, c = 2;
    REQUIRE(lattice.sublattice(r, c) == Sublattice::A);
    auto fields = pin_monopole(lattice, r, c, coupling);
    CHECK(fields.size() == 4);
    for (const auto& [site, h] : fields) CHECK(std::abs(h) == doctest::Approx(2.0 * coupling.eff_j()));

    auto sites = lattice.vertex_sites(r, c);
    double min_energy = 1e18;
    std::vector<int> charges_at_min;
    std::vector<double> energies(16);
    for (int mask = 0; mask < 16; ++mask) {
        std::array<Spin, 4> spins;
        for (int i = 0; i < 4; ++i) spins[static_cast<std::size_t>(i)] = (mask >> i) & 1 ? Spin{1} : Spin{-1};
        energies[static_cast<std::size_t>(mask)] = pinned_vertex_energy(spins, sites, coupling, fields);
        min_energy = std::min(min_energy, energies[static_cast<std::size_t>(mask)]);
    }
    int ground_count = 0;
    for (int mask = 0; mask < 16; ++mask) {
        std::array<Spin, 4> spins;
        for (int i = 0; i < 4; ++i) spins[static_cast<std::size_t>(i)] = (mask >> i) & 1 ? Spin{1} : Spin{-1};
        if (energies[static_cast<std::size_t>(mask)] <= min_energy + 1e-12) {
            ++ground_count;
            VertexReport rep = classify_vertex(spins, Sublattice::A);
            CHECK(rep.type == VertexType::type_iii);
            CHECK(rep.charge == 2);
        }
    }
    CHECK(ground_count == 4);

    // Flipping the field signs selects the opposite charge.
    for (auto& [site, h] : fields) h = -h;
    min_energy = 1e18;
    for (int mask = 0; mask < 16; ++mask) {
        std::array<Spin, 4> spins;
        for (int i = 0; i < 4; ++i) spins[static_cast<std::size_t>(i)] = (mask >> i) & 1 ? Spin{1} : Spin{-1};
        min_energy = std::min(min_energy, pinned_vertex_energy(spins, sites, coupling, fields));
    }
    for (int mask = 0; mask < 16; ++mask) {
        std::array<Spin, 4> spins;
        for (int i = 0; i < 4; ++i) spins[static_cast<std::size_t>(i)] = (mask >> i) & 1 ? Spin{1} : Spin{-1};
        if (pinned_vertex_energy(spins, sites, coupling, fields) <= min_energy + 1e-12)
            CHECK(classify_vertex(spins, Sublattice::A).charge == -2);
    }
}

TEST_CASE("pin vertex must be interior and active") {
    IceLattice lattice(5, 5, Topology::open_boundary, {IceLattice(5, 5).v_site(2, 2)});
    CouplingSpec coupling;
    CHECK_THROWS_AS(pin_monopole(lattice, 0, 2, coupling), ConfigError);
    CHECK_THROWS_AS(pin_monopole(lattice, 2, 4, coupling), ConfigError);
    CHECK_THROWS_AS(pin_monopole(lattice, 2, 2, coupling), ConfigError);  // deactivated by the vacancy
    CHECK_NOTHROW(pin_monopole(lattice, 2, 1, coupling));
}

TEST_CASE("pin plan composes the clamp with the vertex fields") {
    IceLattice lattice(6, 6);
    CouplingSpec coupling;
    Rng rng = make_rng(5);
    BoundaryCondition condition;
    condition.kind = BoundaryKind::pinned_monopole;
    PinPlan plan = make_pin_plan(lattice, coupling, condition, rng);
    CHECK(plan.pinned_vertex == lattice.vertex_index(3, 3));
    CHECK(plan.fields.size() == 4);
    CHECK(plan.frozen.size() == lattice.boundary_sites().size());

    // Dropping the pin fields recovers the zero-flux plan.
    PinPlan zero = make_pin_plan(lattice, coupling, BoundaryCondition{BoundaryKind::zero_flux}, rng);
    PinPlan stripped = plan;
    stripped.fields.clear();
    stripped.pinned_vertex = -1;
    CHECK(stripped.frozen == zero.frozen);
}

TEST_CASE("pin plan serialization round-trips") {
    IceLattice lattice(6, 6);
    CouplingSpec coupling;
    Rng rng = make_rng(6);
    BoundaryCondition condition;
    condition.kind = BoundaryKind::pinned_monopole;
    PinPlan plan = make_pin_plan(lattice, coupling, condition, rng);
    PinPlan back = pin_plan_from_json(pin_plan_to_json(plan));
    CHECK(back.fields.size() == plan.fields.size());
    for (const auto& [site, h] : plan.fields) CHECK(back.fields.at(site) == doctest::Approx(h));
    CHECK(back.frozen == plan.frozen);
    CHECK(back.pinned_vertex == plan.pinned_vertex);
}

TEST_CASE("boundary kind names round-trip") {
    for (BoundaryKind kind : {BoundaryKind::open, BoundaryKind::zero_flux, BoundaryKind::flux_injected,
                              BoundaryKind::pinned_monopole})
        CHECK(boundary_kind_from_name(boundary_kind_name(kind)) == kind);
    CHECK_THROWS_AS(boundary_kind_from_name("bogus"), ConfigError);
}
