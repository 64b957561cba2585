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

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace qice {

/// Raised on invalid experiment or lattice configuration.
class ConfigError : public std::runtime_error {
  public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

enum class Topology { open_boundary, torus };

enum class Sublattice : std::uint8_t { A, B };

enum class VertexType : std::uint8_t { type_i = 0, type_ii = 1, type_iii = 2, type_iv = 3 };

/// Ising value per spin site, +1/-1; 0 marks a vacant site.
using Spin = std::int8_t;

struct SpinState {
    std::vector<Spin> spins;

    Spin at(int site) const { return spins[static_cast<std::size_t>(site)]; }
    Spin& at(int site) { return spins[static_cast<std::size_t>(site)]; }
    int size() const { return static_cast<int>(spins.size()); }
};

/// Antiferromagnetic vertex couplings and longitudinal fields.
///
/// j_par couples the two collinear spin pairs of a vertex (N-S, E-W),
/// j_perp the four perpendicular pairs.  `scale` is the overall energy
/// scale J expressed as a fraction of J_MAX; the effective couplings
/// entering the Hamiltonian are scale*j_par and scale*j_perp.  Fields
/// are absolute energies, zero on every unlisted site.
struct CouplingSpec {
    double j_par = 1.0;
    double j_perp = 1.0;
    double scale = 1.0;
    std::unordered_map<int, double> fields;

    double eff_par() const { return scale * j_par; }
    double eff_perp() const { return scale * j_perp; }
    /// Overall coupling scale J (mean of the two effective couplings).
    double eff_j() const { return 0.5 * (eff_par() + eff_perp()); }

    double field(int site) const {
        auto it = fields.find(site);
        return it == fields.end() ? 0.0 : it->second;
    }

    void validate() const {
        if (j_par <= 0.0 || j_perp <= 0.0) throw ConfigError("couplings must be antiferromagnetic (positive)");
        if (scale <= 0.0) throw ConfigError("coupling scale must be positive");
    }
};

struct VertexReport {
    VertexType type;
    int charge;      // in {-4,-2,0,+2,+4}
    double energy;   // 0 unless computed against a CouplingSpec
};

struct Position {
    double x, y;
};

/// Checkerboard ice lattice: a rows x cols grid of vertices with one
/// Ising spin per edge.  Spins are addressed (row, col, horizontal|vertical)
/// and flattened to a single site index, horizontal block first.
///
/// Open lattices carry dangling boundary edges (one adjacent vertex);
/// tori have none.  Vacant sites are removed spins; any vertex missing
/// a spin is inactive and excluded from energies and statistics.
class IceLattice {
  public:
    IceLattice(int rows, int cols, Topology topology = Topology::open_boundary,
               const std::vector<int>& vacancies = {});

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    Topology topology() const { return topology_; }
    int site_count() const { return n_sites_; }
    int vertex_count() const { return rows_ * cols_; }
    int active_vertex_count() const { return n_active_; }

    // Site addressing.  Horizontal edges H(r,c): r in [0,rows), c in
    // [0,h_cols); vertical edges V(r,c): r in [0,v_rows), c in [0,cols).
    int h_cols() const { return topology_ == Topology::torus ? cols_ : cols_ + 1; }
    int v_rows() const { return topology_ == Topology::torus ? rows_ : rows_ + 1; }
    int h_site(int r, int c) const { return r * h_cols() + c; }
    int v_site(int r, int c) const { return n_h_ + r * cols_ + c; }
    bool is_horizontal(int site) const { return site < n_h_; }

    int vertex_index(int r, int c) const { return r * cols_ + c; }
    Sublattice sublattice(int r, int c) const { return ((r + c) & 1) == 0 ? Sublattice::A : Sublattice::B; }
    /// Charge sign convention: +1 on A vertices, -1 on B.
    int vertex_sign(int r, int c) const { return ((r + c) & 1) == 0 ? 1 : -1; }

    /// The four spin sites of vertex (r,c), in N,E,S,W order.
    std::array<int, 4> vertex_sites(int r, int c) const;

    bool vacant(int site) const { return vacant_[static_cast<std::size_t>(site)] != 0; }
    const std::vector<int>& vacancies() const { return vacancy_list_; }
    bool vertex_active(int r, int c) const { return active_[static_cast<std::size_t>(vertex_index(r, c))] != 0; }
    bool vertex_active(int v) const { return active_[static_cast<std::size_t>(v)] != 0; }

    /// Adjacent vertex indices of a site (-1 where absent).  Horizontal
    /// sites: {west vertex, east vertex}; vertical: {north, south}.
    std::array<int, 2> adjacent_vertices(int site) const;

    /// Boundary sites: non-vacant sites bordering exactly one active
    /// vertex (dangling edges and vacancy-induced interior boundaries).
    const std::vector<int>& boundary_sites() const { return boundary_sites_; }
    /// Vertex sign of the single active vertex of a boundary site, 0 elsewhere.
    int boundary_sign(int site) const { return boundary_sign_[static_cast<std::size_t>(site)]; }

    /// Geometric centre of a site; vertex (r,c) sits at (x=c, y=r).
    Position position(int site) const;
    /// Unit dipole direction for S=+1 (toward the A-side vertex): +-x for
    /// horizontal sites, +-y for vertical ones.  Returns the sign.
    int orientation_sign(int site) const;

    /// Uniformly random spins on non-vacant sites, zero on vacant ones.
    template <typename RngT>
    SpinState random_state(RngT& rng) const {
        SpinState st;
        st.spins.assign(static_cast<std::size_t>(n_sites_), 0);
        for (int s = 0; s < n_sites_; ++s)
            if (!vacant(s)) st.at(s) = (rng() & 1u) ? Spin{1} : Spin{-1};
        return st;
    }

    /// The reference Type-I (Neel) tiling: +1 on horizontal sites, -1 on
    /// vertical ones; every active vertex is Type-I.
    SpinState type_i_state() const;

  private:
    int rows_, cols_;
    Topology topology_;
    int n_h_, n_sites_;
    int n_active_ = 0;
    std::vector<std::uint8_t> vacant_;
    std::vector<int> vacancy_list_;
    std::vector<std::uint8_t> active_;
    std::vector<int> boundary_sites_;
    std::vector<int> boundary_sign_;
};

/// Vertex taxonomy from the four spins (all present) and the sublattice.
/// Q = sign * sum(S); Q=0 splits into Type-I (collinear pairs aligned)
/// and Type-II; |Q|=2 is Type-III, |Q|=4 Type-IV.
VertexReport classify_vertex(const std::array<Spin, 4>& nesw, Sublattice sublattice);
VertexReport classify_vertex(const std::array<Spin, 4>& nesw, Sublattice sublattice, const CouplingSpec& coupling);

/// Pairwise vertex energy
///   E = J_par (S_N S_S + S_E S_W) + J_perp (S_N S_E + S_N S_W + S_S S_E + S_S S_W).
double vertex_energy(const std::array<Spin, 4>& nesw, const CouplingSpec& coupling);

/// Report for vertex (r,c) of a lattice state; nullopt when inactive.
std::optional<VertexReport> vertex_report(const SpinState& state, const IceLattice& lattice, int r, int c,
                                          const CouplingSpec& coupling);

/// Sum of vertex energies over active vertices plus the field term.
double total_energy(const SpinState& state, const IceLattice& lattice, const CouplingSpec& coupling);

/// Net magnetization flux through the boundary of the active region:
/// +1 per boundary spin pointing in, -1 pointing out.  Equals the sum
/// of all active vertex charges for every state (lattice Gauss' law).
int boundary_flux(const SpinState& state, const IceLattice& lattice);

struct ChargeMap {
    int rows = 0, cols = 0;
    std::vector<int> charge;           // 0 on inactive vertices
    std::vector<std::uint8_t> active;  // per-vertex presence mask

    int at(int r, int c) const { return charge[static_cast<std::size_t>(r * cols + c)]; }
    bool present(int r, int c) const { return active[static_cast<std::size_t>(r * cols + c)] != 0; }
    int total_charge() const;
    /// Number of active vertices carrying |Q| >= 2.
    int monopole_count() const;
};

ChargeMap charge_map(const SpinState& state, const IceLattice& lattice);

/// JSON serialization: dimensions, vacancy list, and a row-major spin
/// array with explicit null entries on vacant sites.
std::string lattice_to_json(const IceLattice& lattice);
IceLattice lattice_from_json(const std::string& text);
std::string state_to_json(const SpinState& state, const IceLattice& lattice);
SpinState state_from_json(const std::string& text, const IceLattice& lattice);

}  // namespace qice
