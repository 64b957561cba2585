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

#include "qice/pinning.hpp"

#include <algorithm>

#include "json.hpp"

namespace qice {

const char* boundary_kind_name(BoundaryKind kind) {
    switch (kind) {
        case BoundaryKind::open: return "open";
        case BoundaryKind::zero_flux: return "zero_flux";
        case BoundaryKind::flux_injected: return "flux_injected";
        case BoundaryKind::pinned_monopole: return "pinned_monopole";
    }
    return "open";
}

BoundaryKind boundary_kind_from_name(const std::string& name) {
    if (name == "open") return BoundaryKind::open;
    if (name == "zero_flux") return BoundaryKind::zero_flux;
    if (name == "flux_injected") return BoundaryKind::flux_injected;
    if (name == "pinned_monopole") return BoundaryKind::pinned_monopole;
    throw ConfigError("unknown boundary kind '" + name + "'");
}

Spin clamp_reference(const IceLattice& lattice, int site) {
    return lattice.is_horizontal(site) ? Spin{1} : Spin{-1};
}

PinPlan clamp_boundary(const IceLattice& lattice, bool flip, int flip_site, Rng* rng) {
    const auto& boundary = lattice.boundary_sites();
    if (boundary.empty()) throw ConfigError("clamped boundary conditions need a boundary (not a torus)");
    PinPlan plan;
    for (int s : boundary) plan.frozen[s] = clamp_reference(lattice, s);
    if (flip) {
        int site = flip_site;
        if (site < 0) {
            if (!rng) throw ConfigError("random flip site requested without an RNG");
            site = boundary[static_cast<std::size_t>(uniform_index(*rng, static_cast<int>(boundary.size())))];
        } else if (std::find(boundary.begin(), boundary.end(), site) == boundary.end()) {
            throw ConfigError("flip site is not a boundary site");
        }
        plan.frozen[site] = static_cast<Spin>(-clamp_reference(lattice, site));
        plan.flipped_site = site;
    }
    return plan;
}

std::unordered_map<int, double> pin_monopole(const IceLattice& lattice, int r, int c, const CouplingSpec& coupling) {
    if (r < 0 || r >= lattice.rows() || c < 0 || c >= lattice.cols())
        throw ConfigError("pin vertex out of range");
    if (!lattice.vertex_active(r, c)) throw ConfigError("pin vertex is inactive");
    if (lattice.topology() == Topology::open_boundary &&
        (r == 0 || c == 0 || r == lattice.rows() - 1 || c == lattice.cols() - 1))
        throw ConfigError("pin vertex must be interior");
    // Fields -sign*2J favor sign*sum(S)=+2..+4; the four +2 Type-III
    // configurations tie at vertex+field energy -4J, below every other
    // configuration of the vertex.
    const double h = -lattice.vertex_sign(r, c) * 2.0 * coupling.eff_j();
    std::unordered_map<int, double> fields;
    for (int s : lattice.vertex_sites(r, c)) fields[s] = h;
    return fields;
}

PinPlan make_pin_plan(const IceLattice& lattice, const CouplingSpec& coupling, const BoundaryCondition& condition,
                      Rng& rng) {
    switch (condition.kind) {
        case BoundaryKind::open:
            return {};
        case BoundaryKind::zero_flux:
            return clamp_boundary(lattice);
        case BoundaryKind::flux_injected:
            return clamp_boundary(lattice, true, condition.flip_site, &rng);
        case BoundaryKind::pinned_monopole: {
            PinPlan plan = clamp_boundary(lattice);
            int r = condition.pin_row, c = condition.pin_col;
            if (r < 0 || c < 0) {
                r = lattice.rows() / 2;
                c = lattice.cols() / 2;
            }
            plan.fields = pin_monopole(lattice, r, c, coupling);
            plan.pinned_vertex = lattice.vertex_index(r, c);
            return plan;
        }
    }
    return {};
}

std::string pin_plan_to_json(const PinPlan& plan) {
    nlohmann::json fields = nlohmann::json::object();
    for (const auto& [site, h] : plan.fields) fields[std::to_string(site)] = h;
    nlohmann::json frozen = nlohmann::json::object();
    for (const auto& [site, spin] : plan.frozen) frozen[std::to_string(site)] = static_cast<int>(spin);
    nlohmann::json j;
    j["fields"] = std::move(fields);
    j["frozen"] = std::move(frozen);
    j["pinned_vertex"] = plan.pinned_vertex;
    j["flipped_site"] = plan.flipped_site;
    return j.dump();
}

PinPlan pin_plan_from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    PinPlan plan;
    for (const auto& [key, value] : j.at("fields").items()) plan.fields[std::stoi(key)] = value.get<double>();
    for (const auto& [key, value] : j.at("frozen").items())
        plan.frozen[std::stoi(key)] = static_cast<Spin>(value.get<int>());
    plan.pinned_vertex = j.value("pinned_vertex", -1);
    plan.flipped_site = j.value("flipped_site", -1);
    return plan;
}

}  // namespace qice
