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

#include "qice/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <utility>

#include "json.hpp"

namespace qice {

const char* engine_name(Engine engine) {
    switch (engine) {
        case Engine::metropolis: return "metropolis";
        case Engine::loop: return "loop";
        case Engine::pimc: return "pimc";
    }
    return "metropolis";
}

Engine engine_from_name(const std::string& name) {
    if (name == "metropolis") return Engine::metropolis;
    if (name == "loop") return Engine::loop;
    if (name == "pimc") return Engine::pimc;
    throw ConfigError("unknown engine '" + name + "'");
}

int default_trotter_slices(double gamma, double temperature) {
    int m = static_cast<int>(std::ceil(4.0 * gamma / temperature));
    return std::max(16, m);
}

LocalCouplings::LocalCouplings(const IceLattice& lattice, const CouplingSpec& coupling, const PinPlan& plan) {
    n_sites = lattice.site_count();
    field.assign(static_cast<std::size_t>(n_sites), 0.0);
    frozen.assign(static_cast<std::size_t>(n_sites), 0);

    for (const auto& [site, h] : coupling.fields) {
        if (site < 0 || site >= n_sites) throw ConfigError("field on out-of-range site");
        if (lattice.vacant(site)) throw ConfigError("field assigned to a vacant site");
        field[static_cast<std::size_t>(site)] += h;
    }
    for (const auto& [site, h] : plan.fields) {
        if (site < 0 || site >= n_sites) throw ConfigError("pin field on out-of-range site");
        if (lattice.vacant(site)) throw ConfigError("pin field assigned to a vacant site");
        field[static_cast<std::size_t>(site)] += h;
    }
    for (const auto& [site, spin] : plan.frozen) {
        if (site < 0 || site >= n_sites) throw ConfigError("frozen spin out of range");
        if (lattice.vacant(site)) throw ConfigError("frozen spin assigned to a vacant site");
        if (spin != 1 && spin != -1) throw ConfigError("frozen spin value must be +1 or -1");
        frozen[static_cast<std::size_t>(site)] = 1;
    }

    // Pair terms through active vertices: (N,S) and (E,W) at j_par, the
    // four mixed pairs at j_perp.  Duplicate partners simply accumulate.
    std::vector<std::vector<std::pair<int, double>>> nbr(static_cast<std::size_t>(n_sites));
    const double jp = coupling.eff_par();
    const double jx = coupling.eff_perp();
    static constexpr int pair_a[6] = {0, 1, 0, 0, 2, 2};
    static constexpr int pair_b[6] = {2, 3, 1, 3, 1, 3};
    for (int r = 0; r < lattice.rows(); ++r)
        for (int c = 0; c < lattice.cols(); ++c) {
            if (!lattice.vertex_active(r, c)) continue;
            auto sites = lattice.vertex_sites(r, c);
            for (int k = 0; k < 6; ++k) {
                double j = k < 2 ? jp : jx;
                int a = sites[static_cast<std::size_t>(pair_a[k])];
                int b = sites[static_cast<std::size_t>(pair_b[k])];
                nbr[static_cast<std::size_t>(a)].push_back({b, j});
                nbr[static_cast<std::size_t>(b)].push_back({a, j});
            }
        }

    offsets.assign(static_cast<std::size_t>(n_sites) + 1, 0);
    for (int s = 0; s < n_sites; ++s)
        offsets[static_cast<std::size_t>(s) + 1] = offsets[static_cast<std::size_t>(s)] +
                                                   static_cast<int>(nbr[static_cast<std::size_t>(s)].size());
    partner.resize(static_cast<std::size_t>(offsets.back()));
    strength.resize(static_cast<std::size_t>(offsets.back()));
    for (int s = 0; s < n_sites; ++s) {
        int k = offsets[static_cast<std::size_t>(s)];
        for (const auto& [p, j] : nbr[static_cast<std::size_t>(s)]) {
            partner[static_cast<std::size_t>(k)] = p;
            strength[static_cast<std::size_t>(k)] = j;
            ++k;
        }
    }

    for (int s = 0; s < n_sites; ++s)
        if (!lattice.vacant(s) && !frozen[static_cast<std::size_t>(s)]) free_sites.push_back(s);
}

SweepStats metropolis_sweep(SpinState& state, const LocalCouplings& couplings, double temperature, Rng& rng) {
    SweepStats stats;
    const int n_free = static_cast<int>(couplings.free_sites.size());
    if (n_free == 0) return stats;
    const double inv_t = 1.0 / temperature;
    for (int k = 0; k < n_free; ++k) {
        int site = couplings.free_sites[static_cast<std::size_t>(uniform_index(rng, n_free))];
        double delta = couplings.flip_delta(state, site);
        ++stats.proposed;
        if (delta <= 0.0 || uniform_real(rng) < std::exp(-delta * inv_t)) {
            state.at(site) = static_cast<Spin>(-state.at(site));
            ++stats.accepted;
        }
    }
    return stats;
}

namespace {

// Walk bookkeeping reused across loop updates via thread-local scratch.
struct LoopScratch {
    std::vector<int> visited_at;  // position on path, -1 otherwise
    std::vector<int> path_vertex;
    std::vector<int> path_exit;
};

}  // namespace

LoopResult loop_update(SpinState& state, const IceLattice& lattice, const LocalCouplings& couplings, Rng& rng) {
    thread_local LoopScratch scratch;
    const int n_vertices = lattice.vertex_count();
    scratch.visited_at.assign(static_cast<std::size_t>(n_vertices), -1);
    scratch.path_vertex.clear();
    scratch.path_exit.clear();

    if (lattice.active_vertex_count() == 0) return {};

    auto vertex_charge_sum = [&](int v) {
        int r = v / lattice.cols(), c = v % lattice.cols();
        int sum = 0;
        for (int s : lattice.vertex_sites(r, c)) sum += state.at(s);
        return sum;
    };
    auto vertex_sign_of = [&](int v) { return lattice.vertex_sign(v / lattice.cols(), v % lattice.cols()); };

    // Uniform start over active vertices.
    int v = -1;
    for (int attempt = 0; attempt < 4 * n_vertices && v < 0; ++attempt) {
        int cand = uniform_index(rng, n_vertices);
        if (lattice.vertex_active(cand)) v = cand;
    }
    if (v < 0 || vertex_charge_sum(v) != 0) return {};

    while (true) {
        int pos = static_cast<int>(scratch.path_vertex.size());
        scratch.visited_at[static_cast<std::size_t>(v)] = pos;

        // The two outgoing edges carry sign * S = -1.
        int sign = vertex_sign_of(v);
        int r = v / lattice.cols(), c = v % lattice.cols();
        auto sites = lattice.vertex_sites(r, c);
        int out[2];
        int n_out = 0;
        for (int s : sites)
            if (sign * state.at(s) == -1 && n_out < 2) out[n_out++] = s;
        if (n_out != 2) return {};  // charged vertex cannot appear mid-walk, but stay safe
        int exit_site = out[rng() & 1u];

        if (couplings.frozen[static_cast<std::size_t>(exit_site)] ||
            couplings.field[static_cast<std::size_t>(exit_site)] != 0.0)
            return {};
        auto adj = lattice.adjacent_vertices(exit_site);
        int w = (adj[0] == v) ? adj[1] : adj[0];
        if (w < 0 || !lattice.vertex_active(w)) return {};

        scratch.path_vertex.push_back(v);
        scratch.path_exit.push_back(exit_site);

        int seen = scratch.visited_at[static_cast<std::size_t>(w)];
        if (seen >= 0) {
            // Reverse the cycle from the first visit of w; the tail is discarded.
            for (std::size_t i = static_cast<std::size_t>(seen); i < scratch.path_exit.size(); ++i)
                state.at(scratch.path_exit[i]) = static_cast<Spin>(-state.at(scratch.path_exit[i]));
            return {true, static_cast<int>(scratch.path_exit.size()) - seen};
        }
        if (vertex_charge_sum(w) != 0) return {};
        v = w;
    }
}

WorldlineSet WorldlineSet::replicate(const SpinState& state, int m) {
    WorldlineSet wl(state.size(), m);
    for (int s = 0; s < state.size(); ++s)
        for (int k = 0; k < m; ++k) wl.at(s, k) = state.at(s);
    return wl;
}

PimcKernel::PimcKernel(const IceLattice& lattice, const CouplingSpec& coupling, const PinPlan& plan,
                       const ExposureParams& exposure)
    : couplings_(lattice, coupling, plan) {
    exposure.validate();
    if (exposure.gamma <= 0.0) throw ConfigError("pimc engine requires gamma > 0");
    slices_ = exposure.trotter_slices > 0 ? exposure.trotter_slices
                                          : default_trotter_slices(exposure.gamma, exposure.temperature);
    if (slices_ < 2) throw ConfigError("pimc needs at least two Trotter slices");
    const double beta = 1.0 / exposure.temperature;
    dtau_ = beta / slices_;
    const double a = beta * exposure.gamma / slices_;
    temporal_k_ = -0.5 * std::log(std::tanh(a));
    p_add_ = 1.0 - std::exp(-2.0 * temporal_k_);
}

double PimcKernel::spatial_flip_delta(const WorldlineSet& wl, int site, int m) const {
    double local = couplings_.field[static_cast<std::size_t>(site)];
    for (int k = couplings_.offsets[static_cast<std::size_t>(site)];
         k < couplings_.offsets[static_cast<std::size_t>(site) + 1]; ++k)
        local += couplings_.strength[static_cast<std::size_t>(k)] *
                 wl.at(couplings_.partner[static_cast<std::size_t>(k)], m);
    return -2.0 * wl.at(site, m) * local;
}

void PimcKernel::sweep(WorldlineSet& wl, Rng& rng) const {
    const int n_free = static_cast<int>(couplings_.free_sites.size());
    if (n_free == 0) return;
    const int m_count = slices_;

    // Local (site, slice) flips.
    for (long long k = 0; k < static_cast<long long>(n_free) * m_count; ++k) {
        int site = couplings_.free_sites[static_cast<std::size_t>(uniform_index(rng, n_free))];
        int m = uniform_index(rng, m_count);
        int prev = (m + m_count - 1) % m_count;
        int next = (m + 1) % m_count;
        double action_delta = dtau_ * spatial_flip_delta(wl, site, m) +
                              2.0 * temporal_k_ * wl.at(site, m) * (wl.at(site, prev) + wl.at(site, next));
        if (action_delta <= 0.0 || uniform_real(rng) < std::exp(-action_delta)) {
            wl.at(site, m) = static_cast<Spin>(-wl.at(site, m));
        }
    }

    // Temporal cluster flips: Wolff growth along the imaginary-time ring,
    // Metropolis acceptance on the spatial terms the cluster drags along.
    for (int k = 0; k < n_free; ++k) {
        int site = couplings_.free_sites[static_cast<std::size_t>(uniform_index(rng, n_free))];
        int m0 = uniform_index(rng, m_count);
        Spin value = wl.at(site, m0);
        int lo = m0, hi = m0, size = 1;
        while (size < m_count) {
            int cand = (lo + m_count - 1) % m_count;
            if (wl.at(site, cand) != value || !(uniform_real(rng) < p_add_)) break;
            lo = cand;
            ++size;
        }
        while (size < m_count) {
            int cand = (hi + 1) % m_count;
            if (wl.at(site, cand) != value || !(uniform_real(rng) < p_add_)) break;
            hi = cand;
            ++size;
        }
        double spatial = 0.0;
        for (int i = 0, m = lo; i < size; ++i, m = (m + 1) % m_count) spatial += spatial_flip_delta(wl, site, m);
        spatial *= dtau_;
        if (spatial <= 0.0 || uniform_real(rng) < std::exp(-spatial)) {
            for (int i = 0, m = lo; i < size; ++i, m = (m + 1) % m_count)
                wl.at(site, m) = static_cast<Spin>(-wl.at(site, m));
        }
    }

    // Whole-worldline flips keep the sampler mobile when the temporal
    // coupling is stiff.
    for (int k = 0; k < n_free; ++k) {
        int site = couplings_.free_sites[static_cast<std::size_t>(uniform_index(rng, n_free))];
        double spatial = 0.0;
        for (int m = 0; m < m_count; ++m) spatial += spatial_flip_delta(wl, site, m);
        spatial *= dtau_;
        if (spatial <= 0.0 || uniform_real(rng) < std::exp(-spatial)) {
            for (int m = 0; m < m_count; ++m) wl.at(site, m) = static_cast<Spin>(-wl.at(site, m));
        }
    }
}

SpinState quench_readout(const WorldlineSet& worldlines, Rng& rng) {
    int m = worldlines.slices <= 1 ? 0 : uniform_index(rng, worldlines.slices);
    SpinState state;
    state.spins.assign(static_cast<std::size_t>(worldlines.n_sites), 0);
    for (int s = 0; s < worldlines.n_sites; ++s) state.at(s) = worldlines.at(s, m);
    return state;
}

namespace {

int hamming_over_free(const SpinState& a, const SpinState& b, const LocalCouplings& couplings) {
    int d = 0;
    for (int s : couplings.free_sites)
        if (a.at(s) != b.at(s)) ++d;
    return d;
}

}  // namespace

SampleChain run_protocol(const IceLattice& lattice, const CouplingSpec& coupling, const PinPlan& plan,
                         const ProtocolSpec& protocol, const ExposureParams& exposure,
                         const std::optional<SpinState>& initial, std::uint64_t stream) {
    coupling.validate();
    protocol.validate();
    exposure.validate();

    LocalCouplings couplings(lattice, coupling, plan);
    CouplingSpec effective = coupling;
    for (const auto& [site, h] : plan.fields) effective.fields[site] += h;

    Rng rng = make_rng(derive_seed(protocol.seed, {0x9a5e, stream}));

    SpinState state = initial ? *initial : lattice.random_state(rng);
    if (state.size() != lattice.site_count()) throw ConfigError("initial state does not match lattice");
    for (const auto& [site, spin] : plan.frozen) state.at(site) = spin;
    for (int s = 0; s < lattice.site_count(); ++s)
        if (lattice.vacant(s)) state.at(s) = 0;

    SampleChain chain;
    chain.burn_in = protocol.burn_in;
    chain.states.reserve(static_cast<std::size_t>(protocol.chain_length));

    std::optional<PimcKernel> pimc;
    if (protocol.engine == Engine::pimc) pimc.emplace(lattice, coupling, plan, exposure);

    for (int step = 0; step < protocol.chain_length; ++step) {
        switch (protocol.engine) {
            case Engine::metropolis:
                for (long long k = 0; k < exposure.sweeps; ++k)
                    metropolis_sweep(state, couplings, exposure.temperature, rng);
                break;
            case Engine::loop:
                for (long long k = 0; k < exposure.sweeps; ++k) loop_update(state, lattice, couplings, rng);
                break;
            case Engine::pimc: {
                WorldlineSet wl = WorldlineSet::replicate(state, pimc->slices());
                for (long long k = 0; k < exposure.sweeps; ++k) pimc->sweep(wl, rng);
                state = quench_readout(wl, rng);
                break;
            }
        }

        chain.energy.push_back(total_energy(state, lattice, effective));
        chain.monopoles.push_back(charge_map(state, lattice).monopole_count());
        chain.hamming.push_back(chain.states.empty() ? 0
                                                     : hamming_over_free(state, chain.states.back(), couplings));
        chain.states.push_back(state);
    }
    return chain;
}

void write_chain_ndjson(std::ostream& out, const SampleChain& chain, const IceLattice& lattice) {
    for (int step = 0; step < chain.size(); ++step) {
        nlohmann::json spins = nlohmann::json::array();
        for (int s = 0; s < lattice.site_count(); ++s) {
            if (lattice.vacant(s))
                spins.push_back(nullptr);
            else
                spins.push_back(static_cast<int>(chain.states[static_cast<std::size_t>(step)].at(s)));
        }
        nlohmann::json rec;
        rec["step"] = step;
        rec["burn_in"] = chain.is_burn_in(step);
        rec["spins"] = std::move(spins);
        rec["energy"] = chain.energy[static_cast<std::size_t>(step)];
        rec["monopoles"] = chain.monopoles[static_cast<std::size_t>(step)];
        rec["hamming"] = chain.hamming[static_cast<std::size_t>(step)];
        out << rec.dump() << '\n';
    }
}

SampleChain read_chain_ndjson(std::istream& in, const IceLattice& lattice) {
    SampleChain chain;
    std::string line;
    int burn_in = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        nlohmann::json rec = nlohmann::json::parse(line);
        const auto& arr = rec.at("spins");
        if (static_cast<int>(arr.size()) != lattice.site_count())
            throw ConfigError("chain record does not match lattice size");
        SpinState st;
        st.spins.assign(static_cast<std::size_t>(lattice.site_count()), 0);
        for (int s = 0; s < lattice.site_count(); ++s)
            if (!arr[static_cast<std::size_t>(s)].is_null())
                st.at(s) = static_cast<Spin>(arr[static_cast<std::size_t>(s)].get<int>());
        if (rec.value("burn_in", false)) ++burn_in;
        chain.states.push_back(std::move(st));
        chain.energy.push_back(rec.at("energy").get<double>());
        chain.monopoles.push_back(rec.at("monopoles").get<int>());
        chain.hamming.push_back(rec.value("hamming", 0));
    }
    chain.burn_in = burn_in;
    return chain;
}

}  // namespace qice
