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
#include <functional>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "qice/graph_ising.hpp"
#include "qice/lattice.hpp"
#include "qice/rng.hpp"

namespace qice {

struct ChimeraDims {
    int rows = 16;
    int cols = 16;
    int shore = 4;  // half-cell size; a cell holds 2*shore qubits
};

/// Chimera qubit topology: a grid of complete-bipartite cells whose
/// like-oriented qubits couple to the neighboring cells.  Qubit ids are
/// ((y*cols + x)*2 + u)*shore + k with u=0 vertical, u=1 horizontal.
class ChimeraGraph {
  public:
    ChimeraGraph(ChimeraDims dims, const std::vector<int>& defect_qubits,
                 const std::vector<std::pair<int, int>>& defect_couplers);

    const ChimeraDims& dims() const { return dims_; }
    int qubit_count() const { return dims_.rows * dims_.cols * 2 * dims_.shore; }
    int coupler_count() const;
    int operational_qubit_count() const;
    int operational_coupler_count() const;

    int qubit(int y, int x, int u, int k) const {
        return ((y * dims_.cols + x) * 2 + u) * dims_.shore + k;
    }
    std::array<int, 4> qubit_coords(int q) const {  // y, x, u, k
        int k = q % dims_.shore;
        int rest = q / dims_.shore;
        int u = rest % 2;
        rest /= 2;
        return {rest / dims_.cols, rest % dims_.cols, u, k};
    }

    bool qubit_ok(int q) const { return qubit_ok_[static_cast<std::size_t>(q)] != 0; }
    /// Structural adjacency (in-cell bipartite or like-oriented intercell).
    bool adjacent(int a, int b) const;
    bool coupler_ok(int a, int b) const;

    /// All qubits and in-cell couplers of a cell operational.
    bool cell_clean(int y, int x) const;
    /// All `shore` intercell couplers between two adjacent cells operational.
    bool intercell_clean(int y0, int x0, int y1, int x1) const;

    const std::vector<int>& defect_qubits() const { return defect_qubits_; }
    const std::vector<std::pair<int, int>>& defect_couplers() const { return defect_couplers_; }

  private:
    ChimeraDims dims_;
    std::vector<std::uint8_t> qubit_ok_;
    std::unordered_set<long long> dead_couplers_;
    std::vector<int> defect_qubits_;
    std::vector<std::pair<int, int>> defect_couplers_;

    long long coupler_key(int a, int b) const;
};

ChimeraGraph build_chimera(ChimeraDims dims, const std::vector<int>& defect_qubits = {},
                           const std::vector<std::pair<int, int>>& defect_couplers = {});

struct CouplerValue {
    int a = 0, b = 0;
    double value = 0.0;
};

/// One logical vertex coupling realized by two physical couplers.
struct GadgetCoupler {
    int vertex = 0;
    int site_a = 0, site_b = 0;
    bool parallel = false;
    CouplerValue physical[2];
};

/// Four-qubit-chain embedding of the checkerboard ice lattice into a
/// Chimera graph.  The (rows-2)x(cols-2) interior cells host the vertex
/// gadgets; chains extend one cell in each direction.
struct Embedding {
    ChimeraDims dims;
    int lattice_rows = 0, lattice_cols = 0;
    double base_afm = 0.96;       // per physical AFM coupler at J = J_MAX, before refinement
    double j_over_jmax = 1.0;
    double perp_bias = 1.0;       // j_perp / j_par coupler bias

    std::vector<std::uint8_t> chain_present;      // per logical site
    std::vector<std::array<int, 4>> chains;       // qubits in path order
    std::vector<CouplerValue> chain_couplers;     // FM, value -2
    std::vector<GadgetCoupler> vertex_couplers;   // 6 logical bonds per active vertex
    std::vector<double> flux_offset;              // per qubit
    std::vector<int> vacancies;                   // logical site ids

    int site_count() const { return static_cast<int>(chains.size()); }
    IceLattice lattice() const { return IceLattice(lattice_rows, lattice_cols, Topology::open_boundary, vacancies); }
};

struct EmbedResult {
    Embedding embedding;
    IceLattice lattice;
};

/// Embeds the ice lattice, propagating device defects to lattice
/// vacancies.  The vacancy set is a deterministic function of the defect
/// pattern (defective devices quarantine their cell), so every seed
/// yields the same vacancies; the rng only randomizes qubit index
/// assignments within clean cells.
EmbedResult embed_ice(const ChimeraGraph& graph, Rng& rng, double j_over_jmax = 1.0, double perp_bias = 1.0);

/// Machine checks on an embedding: chain length/connectivity, FM values,
/// coupler ranges, defect avoidance, qubit reuse, and two-coupler vertex
/// gadgets.  Returns human-readable violations; empty means valid.
std::vector<std::string> validate_embedding(const ChimeraGraph& graph, const Embedding& embedding);

/// Reprograms the AFM coupler values for a new point of the coupling
/// sweep, preserving any refinement adjustments proportionally.
Embedding rescale_embedding(const Embedding& embedding, double j_over_jmax, double perp_bias);

/// Synthetic disorder magnitudes for refinement experiments.
struct DisorderModel {
    double coupler_scale = 0.02;  // relative, per AFM coupler
    double field_scale = 0.0;     // absolute, per qubit

    void validate() const {
        if (coupler_scale < 0.0 || field_scale < 0.0) throw ConfigError("disorder scales must be non-negative");
    }
};

/// Multiplicative AFM coupler errors and additive qubit fields drawn
/// from a DisorderModel; indexes follow logical_bonds / qubit ids.
struct DisorderRealization {
    std::vector<double> bond_scale_a;  // per vertex coupler, physical[0]
    std::vector<double> bond_scale_b;  //                    physical[1]
    std::vector<double> qubit_field;   // per qubit
};

DisorderRealization draw_disorder(const Embedding& embedding, const DisorderModel& model, Rng& rng);

/// Chain-intact logical model: each four-qubit chain collapses to one
/// Ising spin; bond strengths are the (disordered) sums of the two
/// physical couplers, fields the per-chain sums of offsets and disorder.
GraphIsingModel logical_model(const Embedding& embedding, const DisorderRealization& disorder);

/// Full qubit-level model with explicit FM chain couplers.
GraphIsingModel chimera_model(const Embedding& embedding, const DisorderRealization& disorder,
                              std::vector<int>& used_qubits);

/// Majority-vote projection of a qubit-level state onto logical spins.
SpinState project_chimera_state(const Embedding& embedding, const std::vector<int>& used_qubits,
                                const std::vector<Spin>& qubit_state);

struct LogicalBond {
    int vertex_coupler_index = 0;  // into Embedding::vertex_couplers
    int site_a = 0, site_b = 0;
    bool parallel = false;
};

std::vector<LogicalBond> logical_bonds(const Embedding& embedding);

/// Estimates fed back by the sampler handle during refinement.
struct CalibrationMeasurement {
    std::vector<double> bond_correlation;  // aligned with logical_bonds
    std::vector<double> magnetization;     // per logical site
};

using SamplerHandle = std::function<CalibrationMeasurement(const Embedding&)>;

struct RefineOptions {
    int max_iterations = 12;
    double coupler_gain = 0.6;
    double field_gain = 0.4;
    double max_adjust = 0.04;        // relative cap per coupler, from the base value
    double spread_threshold = 0.004; // std-dev of bond correlations per class
};

struct RefineResult {
    Embedding embedding;
    int iterations = 0;
    bool converged = false;
    std::vector<double> par_spread;   // per iteration, measured before adjusting
    std::vector<double> perp_spread;
};

/// Iteratively homogenizes the measured bond correlations within the
/// parallel and perpendicular coupler classes (individual adjustments
/// capped at max_adjust of the base value) and steers qubits toward zero
/// magnetization with flux-bias offsets.  Returns the best iterate when
/// the spread threshold is never reached.
RefineResult refine_calibration(const Embedding& embedding, const DisorderModel& disorder, SamplerHandle sampler,
                                const RefineOptions& options = {});

std::string embedding_to_json(const Embedding& embedding, const ChimeraGraph& graph);
struct LoadedEmbedding {
    Embedding embedding;
    ChimeraGraph graph;
};
LoadedEmbedding embedding_from_json(const std::string& text);

}  // namespace qice
