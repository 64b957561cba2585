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

#include <cmath>
#include <map>
#include <sstream>
#include <unordered_map>

#include "doctest.h"
#include "oracles.hpp"
#include "qice/observables.hpp"
#include "qice/pinning.hpp"
#include "qice/sampler.hpp"

using namespace qice;

namespace {

// Transverse-moment estimator over a worldline set:
// <sigma^x> = (1/M) sum_m [ s_m == s_{m+1} ? tanh(a) : coth(a) ], a = beta*gamma/M.
double transverse_moment(const WorldlineSet& wl, int site, double beta, double gamma) {
    const double a = beta * gamma / wl.slices;
    const double t = std::tanh(a), ct = 1.0 / t;
    double sum = 0.0;
    for (int m = 0; m < wl.slices; ++m)
        sum += wl.at(site, m) == wl.at(site, (m + 1) % wl.slices) ? t : ct;
    return sum / wl.slices;
}

// 1x1 lattice with three vacancies: a single fully decoupled spin.
IceLattice free_spin_lattice() {
    IceLattice plain(1, 1);
    return IceLattice(1, 1, Topology::open_boundary, {plain.h_site(0, 0), plain.h_site(0, 1), plain.v_site(0, 0)});
}

}  // namespace

TEST_CASE("flip delta agrees with total energy differences") {
    IceLattice lattice(3, 4, Topology::open_boundary, {4});
    CouplingSpec coupling;
    coupling.j_par = 0.8;
    coupling.j_perp = 1.1;
    coupling.fields[lattice.v_site(1, 1)] = 0.3;
    PinPlan plan;
    plan.fields[lattice.h_site(2, 2)] = -0.5;
    LocalCouplings couplings(lattice, coupling, plan);

    CouplingSpec effective = coupling;
    for (const auto& [site, h] : plan.fields) effective.fields[site] += h;

    Rng rng = make_rng(17);
    for (int trial = 0; trial < 50; ++trial) {
        SpinState state = lattice.random_state(rng);
        for (int site : couplings.free_sites) {
            const double before = total_energy(state, lattice, effective);
            const double delta = couplings.flip_delta(state, site);
            state.at(site) = static_cast<Spin>(-state.at(site));
            CHECK(total_energy(state, lattice, effective) - before == doctest::Approx(delta));
            state.at(site) = static_cast<Spin>(-state.at(site));
        }
    }
}

TEST_CASE("metropolis rejects every uphill flip as T -> 0+") {
    IceLattice lattice(3, 3);
    CouplingSpec coupling;
    LocalCouplings couplings(lattice, coupling, {});
    SpinState state = lattice.type_i_state();
    const SpinState reference = state;
    Rng rng = make_rng(23);
    for (int k = 0; k < 50; ++k) metropolis_sweep(state, couplings, 1e-9, rng);
    CHECK(state.spins == reference.spins);
}

TEST_CASE("zero-energy flips are always accepted") {
    // A fully decoupled spin has delta E = 0 for every proposal.
    IceLattice lattice = free_spin_lattice();
    CouplingSpec coupling;
    LocalCouplings couplings(lattice, coupling, {});
    REQUIRE(couplings.free_sites.size() == 1);
    SpinState state = lattice.type_i_state();
    Rng rng = make_rng(29);
    SweepStats total;
    for (int k = 0; k < 1000; ++k) {
        SweepStats stats = metropolis_sweep(state, couplings, 0.5, rng);
        total.proposed += stats.proposed;
        total.accepted += stats.accepted;
    }
    CHECK(total.proposed == 1000);
    CHECK(total.accepted == total.proposed);
}

TEST_CASE("metropolis stationary distribution matches exact boltzmann on the 2x2 torus") {
    IceLattice lattice(2, 2, Topology::torus);
    CouplingSpec coupling;
    const double temperature = 1.0;

    // Exact enumeration over the 2^8 states.
    std::unordered_map<std::uint64_t, std::size_t> index;
    std::vector<double> probs;
    double z = 0.0;
    std::vector<double> energies;
    oracle::for_each_state(lattice, [&](const SpinState& state) {
        index[oracle::state_key(state, lattice)] = probs.size();
        const double w = std::exp(-total_energy(state, lattice, coupling) / temperature);
        probs.push_back(w);
        z += w;
        energies.push_back(0.0);
    });
    for (auto& p : probs) p /= z;

    LocalCouplings couplings(lattice, coupling, {});
    Rng rng = make_rng(31);
    SpinState state = lattice.random_state(rng);
    std::vector<long long> counts(probs.size(), 0);
    const int samples = 300000;
    for (int k = 0; k < samples; ++k) {
        for (int t = 0; t < 4; ++t) metropolis_sweep(state, couplings, temperature, rng);  // thin to decorrelate
        ++counts[index.at(oracle::state_key(state, lattice))];
    }
    auto check = oracle::check_multinomial(counts, probs);
    CHECK(check.bins == 256);
    CHECK(check.exceed_fraction <= 0.025);
    CHECK(check.max_abs_z < 6.0);
}

TEST_CASE("loop updates preserve the charge map and stay in the ice manifold") {
    IceLattice lattice(4, 4, Topology::torus);
    CouplingSpec coupling;
    LocalCouplings couplings(lattice, coupling, {});
    Rng rng = make_rng(37);

    SUBCASE("ice state stays ice") {
        SpinState state = lattice.type_i_state();
        int flipped = 0;
        for (int k = 0; k < 500; ++k) {
            LoopResult result = loop_update(state, lattice, couplings, rng);
            if (result.flipped) {
                ++flipped;
                CHECK(result.length >= 2);
            }
            ChargeMap charges = charge_map(state, lattice);
            for (int v = 0; v < lattice.vertex_count(); ++v) CHECK(charges.charge[static_cast<std::size_t>(v)] == 0);
        }
        CHECK(flipped > 100);  // torus walks nearly always close
    }

    SUBCASE("monopoles are left untouched") {
        SpinState state = lattice.type_i_state();
        state.at(lattice.h_site(1, 1)) = static_cast<Spin>(-state.at(lattice.h_site(1, 1)));  // create a +/- pair
        ChargeMap before = charge_map(state, lattice);
        REQUIRE(before.monopole_count() == 2);
        int flipped = 0;
        for (int k = 0; k < 2000; ++k) {
            if (loop_update(state, lattice, couplings, rng).flipped) ++flipped;
            ChargeMap after = charge_map(state, lattice);
            CHECK(after.charge == before.charge);
        }
        CHECK(flipped > 0);
    }
}

TEST_CASE("loop updates visit the 2x2 torus ice manifold uniformly") {
    IceLattice lattice(2, 2, Topology::torus);
    auto ice_states = oracle::enumerate_ice_states(lattice);
    REQUIRE(ice_states.size() == 18);
    std::unordered_map<std::uint64_t, std::size_t> index;
    for (std::size_t i = 0; i < ice_states.size(); ++i)
        index[oracle::state_key(ice_states[i], lattice)] = i;

    CouplingSpec coupling;
    LocalCouplings couplings(lattice, coupling, {});
    Rng rng = make_rng(41);
    SpinState state = lattice.type_i_state();
    std::vector<long long> counts(ice_states.size(), 0);
    const int samples = 200000;
    for (int k = 0; k < samples; ++k) {
        loop_update(state, lattice, couplings, rng);
        ++counts[index.at(oracle::state_key(state, lattice))];
    }
    auto check = oracle::check_multinomial(counts, std::vector<double>(18, 1.0 / 18));
    CHECK(check.exceeding_3sigma <= 1);
    CHECK(check.max_abs_z < 6.0);
}

TEST_CASE("loops reject pinned spins") {
    IceLattice lattice(4, 4);
    CouplingSpec coupling;
    PinPlan plan = clamp_boundary(lattice);
    LocalCouplings couplings(lattice, coupling, plan);
    SpinState state = lattice.type_i_state();
    Rng rng = make_rng(43);
    for (int k = 0; k < 500; ++k) {
        loop_update(state, lattice, couplings, rng);
        for (const auto& [site, spin] : plan.frozen) CHECK(state.at(site) == spin);
        CHECK(charge_map(state, lattice).monopole_count() == 0);
    }
}

TEST_CASE("pimc free spin reproduces tanh(gamma/T)") {
    IceLattice lattice = free_spin_lattice();
    CouplingSpec coupling;
    ExposureParams exposure;
    exposure.gamma = 0.7;
    exposure.temperature = 1.0;
    PimcKernel kernel(lattice, coupling, {}, exposure);

    const int site = [&] {
        for (int s = 0; s < lattice.site_count(); ++s)
            if (!lattice.vacant(s)) return s;
        return -1;
    }();

    Rng rng = make_rng(47);
    SpinState init = lattice.type_i_state();
    WorldlineSet wl = WorldlineSet::replicate(init, kernel.slices());
    for (int k = 0; k < 200; ++k) kernel.sweep(wl, rng);  // thermalize
    double sx = 0.0, sz = 0.0;
    const int samples = 20000;
    for (int k = 0; k < samples; ++k) {
        kernel.sweep(wl, rng);
        sx += transverse_moment(wl, site, 1.0 / exposure.temperature, exposure.gamma);
        sz += wl.at(site, 0);
    }
    sx /= samples;
    sz /= samples;
    CHECK(sx == doctest::Approx(std::tanh(0.7)).epsilon(0.03));
    CHECK(std::abs(sz) < 0.05);
}

TEST_CASE("pimc two-point functions match exact diagonalization") {
    IceLattice lattice(2, 2, Topology::torus);
    CouplingSpec coupling;
    const double gamma = 0.5, temperature = 0.5;
    oracle::ExactDiagonalization ed(lattice, coupling, gamma);

    ExposureParams exposure;
    exposure.gamma = gamma;
    exposure.temperature = temperature;
    PimcKernel kernel(lattice, coupling, {}, exposure);
    Rng rng = make_rng(53);
    WorldlineSet wl = WorldlineSet::replicate(lattice.type_i_state(), kernel.slices());
    for (int k = 0; k < 500; ++k) kernel.sweep(wl, rng);

    const auto& sites = ed.sites();
    std::vector<double> zz(3, 0.0);
    const int samples = 40000;
    for (int k = 0; k < samples; ++k) {
        kernel.sweep(wl, rng);
        const int m = uniform_index(rng, kernel.slices());
        zz[0] += wl.at(sites[0], m) * wl.at(sites[1], m);
        zz[1] += wl.at(sites[0], m) * wl.at(sites[4], m);
        zz[2] += wl.at(sites[2], m) * wl.at(sites[5], m);
    }
    for (auto& v : zz) v /= samples;
    CHECK(std::abs(zz[0] - ed.thermal_zz(0, 1, temperature)) < 0.02);
    CHECK(std::abs(zz[1] - ed.thermal_zz(0, 4, temperature)) < 0.02);
    CHECK(std::abs(zz[2] - ed.thermal_zz(2, 5, temperature)) < 0.02);
}

TEST_CASE("pimc marginal slice distribution approaches the classical boltzmann weight at small gamma") {
    IceLattice lattice(2, 2, Topology::torus);
    CouplingSpec coupling;
    const double temperature = 0.8, gamma = 0.02;

    // Reference histogram from the classical engine.
    LocalCouplings couplings(lattice, coupling, {});
    Rng rng_cl = make_rng(59);
    SpinState state = lattice.random_state(rng_cl);
    std::map<std::uint64_t, double> classical;
    const int cl_samples = 200000;
    for (int k = 0; k < cl_samples; ++k) {
        for (int t = 0; t < 2; ++t) metropolis_sweep(state, couplings, temperature, rng_cl);
        classical[oracle::state_key(state, lattice)] += 1.0 / cl_samples;
    }

    ExposureParams exposure;
    exposure.gamma = gamma;
    exposure.temperature = temperature;
    PimcKernel kernel(lattice, coupling, {}, exposure);
    Rng rng = make_rng(61);
    WorldlineSet wl = WorldlineSet::replicate(lattice.type_i_state(), kernel.slices());
    for (int k = 0; k < 500; ++k) kernel.sweep(wl, rng);
    std::map<std::uint64_t, double> quantum;
    const int q_samples = 200000;
    SpinState slice;
    for (int k = 0; k < q_samples; ++k) {
        kernel.sweep(wl, rng);
        slice = quench_readout(wl, rng);
        quantum[oracle::state_key(slice, lattice)] += 1.0 / q_samples;
    }

    double total_variation = 0.0;
    for (const auto& [key, p] : classical) total_variation += std::abs(p - quantum[key]);
    for (const auto& [key, p] : quantum)
        if (classical.find(key) == classical.end()) total_variation += p;
    CHECK(total_variation / 2.0 < 0.03);
}

TEST_CASE("quench readout") {
    SUBCASE("single slice is the identity") {
        IceLattice lattice(2, 2);
        Rng rng = make_rng(67);
        SpinState state = lattice.random_state(rng);
        WorldlineSet wl = WorldlineSet::replicate(state, 1);
        CHECK(quench_readout(wl, rng).spins == state.spins);
    }

    SUBCASE("constant worldlines read out with certainty") {
        IceLattice lattice(2, 2);
        Rng rng = make_rng(71);
        SpinState state = lattice.random_state(rng);
        WorldlineSet wl = WorldlineSet::replicate(state, 16);
        for (int k = 0; k < 20; ++k) CHECK(quench_readout(wl, rng).spins == state.spins);
    }
}

TEST_CASE("run_protocol basics") {
    IceLattice lattice(4, 4);
    CouplingSpec coupling;
    ProtocolSpec protocol;
    protocol.chain_length = 12;
    protocol.burn_in = 4;
    protocol.seed = 99;

    SUBCASE("zero sweeps keeps the chain at the initial state") {
        ExposureParams exposure;
        exposure.sweeps = 0;
        exposure.temperature = 0.5;
        SampleChain chain = run_protocol(lattice, coupling, {}, protocol, exposure);
        for (int step = 1; step < chain.size(); ++step) {
            CHECK(chain.states[static_cast<std::size_t>(step)].spins == chain.states[0].spins);
            CHECK(chain.hamming[static_cast<std::size_t>(step)] == 0);
        }
        CHECK(chain.is_burn_in(3));
        CHECK(!chain.is_burn_in(4));
    }

    SUBCASE("pinned spins never change") {
        Rng rng = make_rng(73);
        PinPlan plan = clamp_boundary(lattice, true, -1, &rng);
        ExposureParams exposure;
        exposure.sweeps = 8;
        exposure.temperature = 2.0;
        SampleChain chain = run_protocol(lattice, coupling, plan, protocol, exposure);
        for (const auto& state : chain.states)
            for (const auto& [site, spin] : plan.frozen) CHECK(state.at(site) == spin);
    }

    SUBCASE("seeded determinism and stream independence") {
        ExposureParams exposure;
        exposure.sweeps = 4;
        exposure.temperature = 1.0;
        SampleChain a = run_protocol(lattice, coupling, {}, protocol, exposure, std::nullopt, 7);
        SampleChain b = run_protocol(lattice, coupling, {}, protocol, exposure, std::nullopt, 7);
        SampleChain c = run_protocol(lattice, coupling, {}, protocol, exposure, std::nullopt, 8);
        REQUIRE(a.size() == b.size());
        for (int step = 0; step < a.size(); ++step)
            CHECK(a.states[static_cast<std::size_t>(step)].spins == b.states[static_cast<std::size_t>(step)].spins);
        bool differs = false;
        for (int step = 0; step < a.size(); ++step)
            if (a.states[static_cast<std::size_t>(step)].spins != c.states[static_cast<std::size_t>(step)].spins)
                differs = true;
        CHECK(differs);
    }

    SUBCASE("contradictory pinning is a configuration error") {
        IceLattice vac(4, 4, Topology::open_boundary, {0});
        PinPlan plan;
        plan.fields[0] = 1.0;
        ExposureParams exposure;
        CHECK_THROWS_AS(run_protocol(vac, coupling, plan, protocol, exposure), ConfigError);

        PinPlan frozen_plan;
        frozen_plan.frozen[0] = 1;
        CHECK_THROWS_AS(run_protocol(vac, coupling, frozen_plan, protocol, exposure), ConfigError);
    }

    SUBCASE("metadata is consistent") {
        ExposureParams exposure;
        exposure.sweeps = 4;
        exposure.temperature = 1.5;
        SampleChain chain = run_protocol(lattice, coupling, {}, protocol, exposure);
        CHECK(chain.size() == protocol.chain_length);
        for (int step = 0; step < chain.size(); ++step) {
            CHECK(chain.energy[static_cast<std::size_t>(step)] ==
                  doctest::Approx(total_energy(chain.states[static_cast<std::size_t>(step)], lattice, coupling)));
            CHECK(chain.monopoles[static_cast<std::size_t>(step)] ==
                  charge_map(chain.states[static_cast<std::size_t>(step)], lattice).monopole_count());
        }
    }
}

TEST_CASE("protocol spec validation") {
    ProtocolSpec protocol;
    protocol.burn_in = 128;
    CHECK_THROWS_AS(protocol.validate(), ConfigError);
    ExposureParams exposure;
    exposure.temperature = 0.0;
    CHECK_THROWS_AS(exposure.validate(), ConfigError);
    IceLattice lattice(2, 2);
    CouplingSpec coupling;
    ExposureParams no_gamma;
    CHECK_THROWS_AS(PimcKernel(lattice, coupling, {}, no_gamma), ConfigError);
}

TEST_CASE("chain ndjson round-trips") {
    IceLattice lattice(3, 3, Topology::open_boundary, {1});
    CouplingSpec coupling;
    ProtocolSpec protocol;
    protocol.chain_length = 6;
    protocol.burn_in = 2;
    protocol.seed = 5;
    ExposureParams exposure;
    exposure.sweeps = 2;
    exposure.temperature = 1.0;
    SampleChain chain = run_protocol(lattice, coupling, {}, protocol, exposure);

    std::ostringstream out;
    write_chain_ndjson(out, chain, lattice);
    std::istringstream in(out.str());
    SampleChain back = read_chain_ndjson(in, lattice);
    REQUIRE(back.size() == chain.size());
    CHECK(back.burn_in == chain.burn_in);
    for (int step = 0; step < chain.size(); ++step) {
        CHECK(back.states[static_cast<std::size_t>(step)].spins == chain.states[static_cast<std::size_t>(step)].spins);
        CHECK(back.energy[static_cast<std::size_t>(step)] == doctest::Approx(chain.energy[static_cast<std::size_t>(step)]));
        CHECK(back.monopoles[static_cast<std::size_t>(step)] == chain.monopoles[static_cast<std::size_t>(step)]);
        CHECK(back.hamming[static_cast<std::size_t>(step)] == chain.hamming[static_cast<std::size_t>(step)]);
    }
}

TEST_CASE("trotter slice default") {
    CHECK(default_trotter_slices(0.34, 0.089) == 16);
    CHECK(default_trotter_slices(2.0, 0.1) == 80);
    CHECK(default_trotter_slices(0.01, 1.0) == 16);
}
