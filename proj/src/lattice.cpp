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

#include "qice/lattice.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"

namespace qice {

IceLattice::IceLattice(int rows, int cols, Topology topology, const std::vector<int>& vacancies)
    : rows_(rows), cols_(cols), topology_(topology) {
    if (rows < 1 || cols < 1) throw ConfigError("lattice dimensions must be positive");
    if (topology == Topology::torus && ((rows & 1) || (cols & 1)))
        throw ConfigError("torus dimensions must be even to keep the sublattices bipartite");
    n_h_ = rows_ * h_cols();
    n_sites_ = n_h_ + v_rows() * cols_;

    vacant_.assign(static_cast<std::size_t>(n_sites_), 0);
    for (int s : vacancies) {
        if (s < 0 || s >= n_sites_) throw ConfigError("vacancy site index out of range");
        vacant_[static_cast<std::size_t>(s)] = 1;
    }
    vacancy_list_.clear();
    for (int s = 0; s < n_sites_; ++s)
        if (vacant_[static_cast<std::size_t>(s)]) vacancy_list_.push_back(s);

    active_.assign(static_cast<std::size_t>(vertex_count()), 1);
    for (int r = 0; r < rows_; ++r)
        for (int c = 0; c < cols_; ++c) {
            for (int s : vertex_sites(r, c))
                if (vacant(s)) active_[static_cast<std::size_t>(vertex_index(r, c))] = 0;
            n_active_ += active_[static_cast<std::size_t>(vertex_index(r, c))];
        }

    boundary_sign_.assign(static_cast<std::size_t>(n_sites_), 0);
    for (int s = 0; s < n_sites_; ++s) {
        if (vacant(s)) continue;
        auto adj = adjacent_vertices(s);
        int n_active_adj = 0;
        int sign = 0;
        for (int v : adj) {
            if (v < 0 || !vertex_active(v)) continue;
            ++n_active_adj;
            int r = v / cols_, c = v % cols_;
            sign = vertex_sign(r, c);
        }
        if (n_active_adj == 1) {
            boundary_sites_.push_back(s);
            boundary_sign_[static_cast<std::size_t>(s)] = sign;
        }
    }
}

std::array<int, 4> IceLattice::vertex_sites(int r, int c) const {
    if (topology_ == Topology::torus) {
        return {v_site(r, c), h_site(r, (c + 1) % cols_), v_site((r + 1) % rows_, c), h_site(r, c)};
    }
    return {v_site(r, c), h_site(r, c + 1), v_site(r + 1, c), h_site(r, c)};
}

std::array<int, 2> IceLattice::adjacent_vertices(int site) const {
    if (is_horizontal(site)) {
        int r = site / h_cols(), c = site % h_cols();
        if (topology_ == Topology::torus)
            return {vertex_index(r, (c + cols_ - 1) % cols_), vertex_index(r, c)};
        int west = (c >= 1) ? vertex_index(r, c - 1) : -1;
        int east = (c < cols_) ? vertex_index(r, c) : -1;
        return {west, east};
    }
    int off = site - n_h_;
    int r = off / cols_, c = off % cols_;
    if (topology_ == Topology::torus)
        return {vertex_index((r + rows_ - 1) % rows_, c), vertex_index(r, c)};
    int north = (r >= 1) ? vertex_index(r - 1, c) : -1;
    int south = (r < rows_) ? vertex_index(r, c) : -1;
    return {north, south};
}

Position IceLattice::position(int site) const {
    if (is_horizontal(site)) {
        int r = site / h_cols(), c = site % h_cols();
        return {static_cast<double>(c) - 0.5, static_cast<double>(r)};
    }
    int off = site - n_h_;
    int r = off / cols_, c = off % cols_;
    return {static_cast<double>(c), static_cast<double>(r) - 0.5};
}

int IceLattice::orientation_sign(int site) const {
    // +axis points toward the east (horizontal) or south (vertical)
    // neighbor slot; that slot is the A vertex when (r+c) is even.
    if (is_horizontal(site)) {
        int r = site / h_cols(), c = site % h_cols();
        return ((r + c) & 1) == 0 ? 1 : -1;
    }
    int off = site - n_h_;
    int r = off / cols_, c = off % cols_;
    return ((r + c) & 1) == 0 ? 1 : -1;
}

SpinState IceLattice::type_i_state() const {
    SpinState st;
    st.spins.assign(static_cast<std::size_t>(n_sites_), 0);
    for (int s = 0; s < n_sites_; ++s)
        if (!vacant(s)) st.at(s) = is_horizontal(s) ? Spin{1} : Spin{-1};
    return st;
}

VertexReport classify_vertex(const std::array<Spin, 4>& nesw, Sublattice sublattice) {
    int sum = nesw[0] + nesw[1] + nesw[2] + nesw[3];
    int q = (sublattice == Sublattice::A ? 1 : -1) * sum;
    VertexType type;
    if (q == 4 || q == -4) {
        type = VertexType::type_iv;
    } else if (q == 2 || q == -2) {
        type = VertexType::type_iii;
    } else {
        type = (nesw[0] == nesw[2]) ? VertexType::type_i : VertexType::type_ii;
    }
    return {type, q, 0.0};
}

VertexReport classify_vertex(const std::array<Spin, 4>& nesw, Sublattice sublattice, const CouplingSpec& coupling) {
    VertexReport rep = classify_vertex(nesw, sublattice);
    rep.energy = vertex_energy(nesw, coupling);
    return rep;
}

double vertex_energy(const std::array<Spin, 4>& nesw, const CouplingSpec& coupling) {
    const int n = nesw[0], e = nesw[1], s = nesw[2], w = nesw[3];
    return coupling.eff_par() * (n * s + e * w) + coupling.eff_perp() * (n * e + n * w + s * e + s * w);
}

std::optional<VertexReport> vertex_report(const SpinState& state, const IceLattice& lattice, int r, int c,
                                          const CouplingSpec& coupling) {
    if (!lattice.vertex_active(r, c)) return std::nullopt;
    auto sites = lattice.vertex_sites(r, c);
    std::array<Spin, 4> nesw{state.at(sites[0]), state.at(sites[1]), state.at(sites[2]), state.at(sites[3])};
    return classify_vertex(nesw, lattice.sublattice(r, c), coupling);
}

double total_energy(const SpinState& state, const IceLattice& lattice, const CouplingSpec& coupling) {
    double e = 0.0;
    for (int r = 0; r < lattice.rows(); ++r)
        for (int c = 0; c < lattice.cols(); ++c) {
            if (!lattice.vertex_active(r, c)) continue;
            auto sites = lattice.vertex_sites(r, c);
            std::array<Spin, 4> nesw{state.at(sites[0]), state.at(sites[1]), state.at(sites[2]), state.at(sites[3])};
            e += vertex_energy(nesw, coupling);
        }
    for (const auto& [site, h] : coupling.fields) {
        if (site < 0 || site >= lattice.site_count()) throw ConfigError("field on out-of-range site");
        if (lattice.vacant(site)) throw ConfigError("field on vacant site");
        e += h * state.at(site);
    }
    return e;
}

int boundary_flux(const SpinState& state, const IceLattice& lattice) {
    int flux = 0;
    for (int s : lattice.boundary_sites()) flux += lattice.boundary_sign(s) * state.at(s);
    return flux;
}

int ChargeMap::total_charge() const {
    int q = 0;
    for (std::size_t i = 0; i < charge.size(); ++i)
        if (active[i]) q += charge[i];
    return q;
}

int ChargeMap::monopole_count() const {
    int n = 0;
    for (std::size_t i = 0; i < charge.size(); ++i)
        if (active[i] && (charge[i] == 2 || charge[i] == -2 || charge[i] == 4 || charge[i] == -4)) ++n;
    return n;
}

ChargeMap charge_map(const SpinState& state, const IceLattice& lattice) {
    ChargeMap map;
    map.rows = lattice.rows();
    map.cols = lattice.cols();
    map.charge.assign(static_cast<std::size_t>(lattice.vertex_count()), 0);
    map.active.assign(static_cast<std::size_t>(lattice.vertex_count()), 0);
    for (int r = 0; r < lattice.rows(); ++r)
        for (int c = 0; c < lattice.cols(); ++c) {
            if (!lattice.vertex_active(r, c)) continue;
            auto sites = lattice.vertex_sites(r, c);
            int sum = 0;
            for (int s : sites) sum += state.at(s);
            std::size_t i = static_cast<std::size_t>(lattice.vertex_index(r, c));
            map.charge[i] = lattice.vertex_sign(r, c) * sum;
            map.active[i] = 1;
        }
    return map;
}

namespace {

const char* topology_name(Topology t) { return t == Topology::torus ? "torus" : "open"; }

Topology topology_from_name(const std::string& name) {
    if (name == "torus") return Topology::torus;
    if (name == "open") return Topology::open_boundary;
    throw ConfigError("unknown topology '" + name + "'");
}

}  // namespace

std::string lattice_to_json(const IceLattice& lattice) {
    nlohmann::json j;
    j["rows"] = lattice.rows();
    j["cols"] = lattice.cols();
    j["topology"] = topology_name(lattice.topology());
    j["vacancies"] = lattice.vacancies();
    return j.dump();
}

IceLattice lattice_from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    return IceLattice(j.at("rows").get<int>(), j.at("cols").get<int>(),
                      topology_from_name(j.at("topology").get<std::string>()),
                      j.value("vacancies", std::vector<int>{}));
}

std::string state_to_json(const SpinState& state, const IceLattice& lattice) {
    nlohmann::json arr = nlohmann::json::array();
    for (int s = 0; s < lattice.site_count(); ++s) {
        if (lattice.vacant(s))
            arr.push_back(nullptr);
        else
            arr.push_back(static_cast<int>(state.at(s)));
    }
    nlohmann::json j;
    j["spins"] = std::move(arr);
    return j.dump();
}

SpinState state_from_json(const std::string& text, const IceLattice& lattice) {
    nlohmann::json j = nlohmann::json::parse(text);
    const auto& arr = j.at("spins");
    if (static_cast<int>(arr.size()) != lattice.site_count())
        throw ConfigError("spin array length does not match lattice");
    SpinState st;
    st.spins.assign(static_cast<std::size_t>(lattice.site_count()), 0);
    for (int s = 0; s < lattice.site_count(); ++s) {
        if (arr[static_cast<std::size_t>(s)].is_null()) {
            if (!lattice.vacant(s)) throw ConfigError("null spin on non-vacant site");
            continue;
        }
        int v = arr[static_cast<std::size_t>(s)].get<int>();
        if (v != 1 && v != -1) throw ConfigError("spin values must be +1 or -1");
        if (lattice.vacant(s)) throw ConfigError("value given for vacant site");
        st.at(s) = static_cast<Spin>(v);
    }
    return st;
}

}  // namespace qice
