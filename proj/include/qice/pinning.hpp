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

#pragma once

#include <string>
#include <unordered_map>

#include "qice/lattice.hpp"
#include "qice/rng.hpp"

namespace qice {

enum class BoundaryKind { open, zero_flux, flux_injected, pinned_monopole };

const char* boundary_kind_name(BoundaryKind kind);
BoundaryKind boundary_kind_from_name(const std::string& name);

struct BoundaryCondition {
    BoundaryKind kind = BoundaryKind::open;
    /// Boundary site to flip for flux_injected; -1 draws uniformly at random.
    int flip_site = -1;
    /// Vertex to force into a Type-III configuration for pinned_monopole;
    /// (-1,-1) selects the central interior vertex.
    int pin_row = -1;
    int pin_col = -1;
};

/// Concrete pinning assignment for one run.  Clamped boundary spins are
/// frozen at fixed values (excluded from updates); the pinned-monopole
/// vertex uses true longitudinal fields so its four charge-degenerate
/// Type-III configurations stay degenerate.
struct PinPlan {
    std::unordered_map<int, double> fields;
    std::unordered_map<int, Spin> frozen;
    int pinned_vertex = -1;  // vertex index, -1 when none
    int flipped_site = -1;   // boundary site flipped from the background, -1 when none

    bool frozen_site(int site) const { return frozen.find(site) != frozen.end(); }
};

/// Reference clamp value on a boundary site: the Type-I background
/// (+1 horizontal, -1 vertical).
Spin clamp_reference(const IceLattice& lattice, int site);

/// Freezes every boundary site (including vacancy-induced interior
/// boundaries) to the Type-I background; optionally flips one site.
/// flip_site -1 with flip=true draws the site uniformly from the boundary.
PinPlan clamp_boundary(const IceLattice& lattice, bool flip = false, int flip_site = -1, Rng* rng = nullptr);

/// Field map of magnitude 2J on the four spins of vertex (r,c), signed
/// so the four charge +2 Type-III configurations of that vertex are the
/// degenerate minima of its vertex+field energy.
std::unordered_map<int, double> pin_monopole(const IceLattice& lattice, int r, int c, const CouplingSpec& coupling);

/// Builds the full plan for one of the four boundary conditions.
PinPlan make_pin_plan(const IceLattice& lattice, const CouplingSpec& coupling, const BoundaryCondition& condition,
                      Rng& rng);

std::string pin_plan_to_json(const PinPlan& plan);
PinPlan pin_plan_from_json(const std::string& text);

}  // namespace qice
