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

#include "qice/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"

namespace qice {

ChimeraGraph::ChimeraGraph(ChimeraDims dims, const std::vector<int>& defect_qubits,
                           const std::vector<std::pair<int, int>>& defect_couplers)
    : dims_(dims), defect_qubits_(defect_qubits), defect_couplers_(defect_couplers) {
    if (dims.rows < 1 || dims.cols < 1 || dims.shore < 1) throw ConfigError("chimera dimensions must be positive");
    qubit_ok_.assign(static_cast<std::size_t>(qubit_count()), 1);
    for (int q : defect_qubits) {
        if (q < 0 || q >= qubit_count()) throw ConfigError("defect qubit id out of range");
        qubit_ok_[static_cast<std::size_t>(q)] = 0;
    }
    for (const auto& [a, b] : defect_couplers) {
        if (a < 0 || a >= qubit_count() || b < 0 || b >= qubit_count())
            throw ConfigError("defect coupler endpoint out of range");
        if (!adjacent(a, b)) throw ConfigError("defect coupler is not a chimera edge");
        dead_couplers_.insert(coupler_key(a, b));
    }
}

long long ChimeraGraph::coupler_key(int a, int b) const {
    if (a > b) std::swap(a, b);
    return static_cast<long long>(a) * qubit_count() + b;
}

bool ChimeraGraph::adjacent(int a, int b) const {
    if (a == b) return false;
    auto ca = qubit_coords(a), cb = qubit_coords(b);
    if (ca[0] == cb[0] && ca[1] == cb[1]) return ca[2] != cb[2];  // in-cell bipartite
    if (ca[2] != cb[2] || ca[3] != cb[3]) return false;
    if (ca[2] == 0)  // vertical qubits couple north-south
        return ca[1] == cb[1] && std::abs(ca[0] - cb[0]) == 1;
    return ca[0] == cb[0] && std::abs(ca[1] - cb[1]) == 1;
}

bool ChimeraGraph::coupler_ok(int a, int b) const {
    return adjacent(a, b) && qubit_ok(a) && qubit_ok(b) &&
           dead_couplers_.find(coupler_key(a, b)) == dead_couplers_.end();
}

int ChimeraGraph::coupler_count() const {
    const int in_cell = dims_.rows * dims_.cols * dims_.shore * dims_.shore;
    const int vertical = (dims_.rows - 1) * dims_.cols * dims_.shore;
    const int horizontal = dims_.rows * (dims_.cols - 1) * dims_.shore;
    return in_cell + vertical + horizontal;
}

int ChimeraGraph::operational_qubit_count() const {
    return static_cast<int>(std::count(qubit_ok_.begin(), qubit_ok_.end(), std::uint8_t{1}));
}

int ChimeraGraph::operational_coupler_count() const {
    int n = 0;
    for (int y = 0; y < dims_.rows; ++y)
        for (int x = 0; x < dims_.cols; ++x) {
            for (int i = 0; i < dims_.shore; ++i)
                for (int j = 0; j < dims_.shore; ++j)
                    if (coupler_ok(qubit(y, x, 0, i), qubit(y, x, 1, j))) ++n;
            if (y + 1 < dims_.rows)
                for (int k = 0; k < dims_.shore; ++k)
                    if (coupler_ok(qubit(y, x, 0, k), qubit(y + 1, x, 0, k))) ++n;
            if (x + 1 < dims_.cols)
                for (int k = 0; k < dims_.shore; ++k)
                    if (coupler_ok(qubit(y, x, 1, k), qubit(y, x + 1, 1, k))) ++n;
        }
    return n;
}

bool ChimeraGraph::cell_clean(int y, int x) const {
    for (int u = 0; u < 2; ++u)
        for (int k = 0; k < dims_.shore; ++k)
            if (!qubit_ok(qubit(y, x, u, k))) return false;
    for (int i = 0; i < dims_.shore; ++i)
        for (int j = 0; j < dims_.shore; ++j)
            if (!coupler_ok(qubit(y, x, 0, i), qubit(y, x, 1, j))) return false;
    return true;
}

bool ChimeraGraph::intercell_clean(int y0, int x0, int y1, int x1) const {
    const int u = (x0 == x1) ? 0 : 1;
    for (int k = 0; k < dims_.shore; ++k)
        if (!coupler_ok(qubit(y0, x0, u, k), qubit(y1, x1, u, k))) return false;
    return true;
}

ChimeraGraph build_chimera(ChimeraDims dims, const std::vector<int>& defect_qubits,
                           const std::vector<std::pair<int, int>>& defect_couplers) {
    return ChimeraGraph(dims, defect_qubits, defect_couplers);
}

namespace {

// Slot = logical spin site; horizontal slots span cells (r+1, c)-(r+1, c+1),
// vertical slots span (r, c+1)-(r+1, c+1), matching the lattice addressing.
struct SlotCells {
    int y0, x0, y1, x1;
};

SlotCells slot_cells(const IceLattice& lattice, int site) {
    if (lattice.is_horizontal(site)) {
        const int r = site / lattice.h_cols(), c = site % lattice.h_cols();
        return {r + 1, c, r + 1, c + 1};
    }
    const int off = site - lattice.h_site(0, 0) - lattice.rows() * lattice.h_cols();
    const int r = off / lattice.cols(), c = off % lattice.cols();
    return {r, c + 1, r + 1, c + 1};
}

}  // namespace

EmbedResult embed_ice(const ChimeraGraph& graph, Rng& rng, double j_over_jmax, double perp_bias) {
    const ChimeraDims dims = graph.dims();
    if (dims.rows < 3 || dims.cols < 3 || dims.shore < 2)
        throw ConfigError("chimera graph too small for an ice lattice");
    const int rows = dims.rows - 2, cols = dims.cols - 2;
    IceLattice full(rows, cols, Topology::open_boundary);

    // Deterministic vacancy rule: a slot is kept only when both of its
    // cells are clean and the intercell coupler bundle is intact, so any
    // index assignment in kept slots avoids every defect and the vacancy
    // set does not depend on the seed.
    std::vector<std::uint8_t> keep(static_cast<std::size_t>(full.site_count()), 0);
    std::vector<int> vacancies;
    for (int s = 0; s < full.site_count(); ++s) {
        SlotCells cells = slot_cells(full, s);
        bool ok = graph.cell_clean(cells.y0, cells.x0) && graph.cell_clean(cells.y1, cells.x1) &&
                  graph.intercell_clean(cells.y0, cells.x0, cells.y1, cells.x1);
        keep[static_cast<std::size_t>(s)] = ok ? 1 : 0;
        if (!ok) vacancies.push_back(s);
    }

    Embedding emb;
    emb.dims = dims;
    emb.lattice_rows = rows;
    emb.lattice_cols = cols;
    emb.j_over_jmax = j_over_jmax;
    emb.perp_bias = perp_bias;
    emb.vacancies = vacancies;
    emb.chain_present.assign(static_cast<std::size_t>(full.site_count()), 0);
    emb.chains.assign(static_cast<std::size_t>(full.site_count()), {-1, -1, -1, -1});
    emb.flux_offset.assign(static_cast<std::size_t>(graph.qubit_count()), 0.0);

    // Shared indices: vertical slots share a u=0 index down each column,
    // horizontal slots a u=1 index along each row; consecutive slots that
    // meet in a cell must differ.
    std::vector<int> shared(static_cast<std::size_t>(full.site_count()), -1);
    for (int c = 0; c < cols; ++c) {
        int prev = -1;
        for (int r = 0; r < full.v_rows(); ++r) {
            const int s = full.v_site(r, c);
            if (!keep[static_cast<std::size_t>(s)]) {
                prev = -1;
                continue;
            }
            int pick;
            do {
                pick = uniform_index(rng, dims.shore);
            } while (pick == prev);
            shared[static_cast<std::size_t>(s)] = pick;
            prev = pick;
        }
    }
    for (int r = 0; r < rows; ++r) {
        int prev = -1;
        for (int c = 0; c < full.h_cols(); ++c) {
            const int s = full.h_site(r, c);
            if (!keep[static_cast<std::size_t>(s)]) {
                prev = -1;
                continue;
            }
            int pick;
            do {
                pick = uniform_index(rng, dims.shore);
            } while (pick == prev);
            shared[static_cast<std::size_t>(s)] = pick;
            prev = pick;
        }
    }

    // Local indices per (slot, cell).  In each cell the vertical chains
    // occupy their shared u=0 index and a local u=1 one; horizontal
    // chains the reverse.  Locals are drawn without replacement from the
    // indices the shared assignments leave free.
    struct CellUse {
        std::vector<std::pair<int, int>> vertical;    // (slot, end: 0=first cell)
        std::vector<std::pair<int, int>> horizontal;
    };
    std::vector<CellUse> cell_use(static_cast<std::size_t>(dims.rows * dims.cols));
    auto cell_id = [&](int y, int x) { return y * dims.cols + x; };
    for (int s = 0; s < full.site_count(); ++s) {
        if (!keep[static_cast<std::size_t>(s)]) continue;
        SlotCells cells = slot_cells(full, s);
        if (full.is_horizontal(s)) {
            cell_use[static_cast<std::size_t>(cell_id(cells.y0, cells.x0))].horizontal.push_back({s, 0});
            cell_use[static_cast<std::size_t>(cell_id(cells.y1, cells.x1))].horizontal.push_back({s, 1});
        } else {
            cell_use[static_cast<std::size_t>(cell_id(cells.y0, cells.x0))].vertical.push_back({s, 0});
            cell_use[static_cast<std::size_t>(cell_id(cells.y1, cells.x1))].vertical.push_back({s, 1});
        }
    }

    // local[site][end] for the non-shared orientation.
    std::vector<std::array<int, 2>> local(static_cast<std::size_t>(full.site_count()), {-1, -1});
    std::vector<int> pool;
    for (int y = 0; y < dims.rows; ++y)
        for (int x = 0; x < dims.cols; ++x) {
            const CellUse& use = cell_use[static_cast<std::size_t>(cell_id(y, x))];
            // u=0 pool: shared vertical indices are taken.
            pool.clear();
            for (int k = 0; k < dims.shore; ++k) pool.push_back(k);
            for (const auto& [slot, end] : use.vertical)
                pool.erase(std::remove(pool.begin(), pool.end(), shared[static_cast<std::size_t>(slot)]), pool.end());
            std::shuffle(pool.begin(), pool.end(), rng);
            std::size_t next = 0;
            for (const auto& [slot, end] : use.horizontal)
                local[static_cast<std::size_t>(slot)][static_cast<std::size_t>(end)] = pool[next++];
            // u=1 pool: shared horizontal indices are taken.
            pool.clear();
            for (int k = 0; k < dims.shore; ++k) pool.push_back(k);
            for (const auto& [slot, end] : use.horizontal)
                pool.erase(std::remove(pool.begin(), pool.end(), shared[static_cast<std::size_t>(slot)]), pool.end());
            std::shuffle(pool.begin(), pool.end(), rng);
            next = 0;
            for (const auto& [slot, end] : use.vertical)
                local[static_cast<std::size_t>(slot)][static_cast<std::size_t>(end)] = pool[next++];
        }

    // Materialize chains and their FM couplers.
    for (int s = 0; s < full.site_count(); ++s) {
        if (!keep[static_cast<std::size_t>(s)]) continue;
        SlotCells cells = slot_cells(full, s);
        std::array<int, 4> chain{};
        if (full.is_horizontal(s)) {
            const int b = shared[static_cast<std::size_t>(s)];
            chain = {graph.qubit(cells.y0, cells.x0, 0, local[static_cast<std::size_t>(s)][0]),
                     graph.qubit(cells.y0, cells.x0, 1, b), graph.qubit(cells.y1, cells.x1, 1, b),
                     graph.qubit(cells.y1, cells.x1, 0, local[static_cast<std::size_t>(s)][1])};
        } else {
            const int a = shared[static_cast<std::size_t>(s)];
            chain = {graph.qubit(cells.y0, cells.x0, 1, local[static_cast<std::size_t>(s)][0]),
                     graph.qubit(cells.y0, cells.x0, 0, a), graph.qubit(cells.y1, cells.x1, 0, a),
                     graph.qubit(cells.y1, cells.x1, 1, local[static_cast<std::size_t>(s)][1])};
        }
        emb.chain_present[static_cast<std::size_t>(s)] = 1;
        emb.chains[static_cast<std::size_t>(s)] = chain;
        for (int i = 0; i < 3; ++i)
            emb.chain_couplers.push_back({chain[static_cast<std::size_t>(i)], chain[static_cast<std::size_t>(i) + 1], -2.0});
    }

    // Vertex gadgets: for each active vertex, the six logical bonds get
    // two physical couplers each, crossing the chains' in-cell qubit
    // pairs; a vertex missing any chain keeps no AFM term at all.
    IceLattice lattice(rows, cols, Topology::open_boundary, vacancies);
    auto in_cell_pair = [&](int site, int y, int x) -> std::array<int, 2> {  // u0 qubit, u1 qubit
        std::array<int, 2> out{-1, -1};
        for (int q : emb.chains[static_cast<std::size_t>(site)]) {
            auto qc = graph.qubit_coords(q);
            if (qc[0] == y && qc[1] == x) out[static_cast<std::size_t>(qc[2] == 0 ? 0 : 1)] = q;
        }
        return out;
    };
    static constexpr int pair_a[6] = {0, 1, 0, 0, 2, 2};
    static constexpr int pair_b[6] = {2, 3, 1, 3, 1, 3};
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            if (!lattice.vertex_active(r, c)) continue;
            auto sites = lattice.vertex_sites(r, c);
            const int y = r + 1, x = c + 1;
            for (int k = 0; k < 6; ++k) {
                const bool parallel = k < 2;
                const int sa = sites[static_cast<std::size_t>(pair_a[k])];
                const int sb = sites[static_cast<std::size_t>(pair_b[k])];
                auto qa = in_cell_pair(sa, y, x);
                auto qb = in_cell_pair(sb, y, x);
                const double value = emb.base_afm * j_over_jmax * (parallel ? 1.0 : perp_bias);
                GadgetCoupler gadget;
                gadget.vertex = lattice.vertex_index(r, c);
                gadget.site_a = sa;
                gadget.site_b = sb;
                gadget.parallel = parallel;
                gadget.physical[0] = {qa[0], qb[1], value};
                gadget.physical[1] = {qb[0], qa[1], value};
                emb.vertex_couplers.push_back(gadget);
            }
        }

    return {std::move(emb), std::move(lattice)};
}

std::vector<std::string> validate_embedding(const ChimeraGraph& graph, const Embedding& embedding) {
    std::vector<std::string> problems;
    auto complain = [&](const std::string& msg) { problems.push_back(msg); };

    std::vector<int> qubit_owner(static_cast<std::size_t>(graph.qubit_count()), -1);
    for (int s = 0; s < embedding.site_count(); ++s) {
        if (!embedding.chain_present[static_cast<std::size_t>(s)]) continue;
        const auto& chain = embedding.chains[static_cast<std::size_t>(s)];
        for (int q : chain) {
            if (q < 0 || q >= graph.qubit_count()) {
                complain("site " + std::to_string(s) + ": chain qubit out of range");
                continue;
            }
            if (!graph.qubit_ok(q)) complain("site " + std::to_string(s) + ": chain uses defective qubit");
            if (qubit_owner[static_cast<std::size_t>(q)] >= 0)
                complain("site " + std::to_string(s) + ": qubit shared with site " +
                         std::to_string(qubit_owner[static_cast<std::size_t>(q)]));
            qubit_owner[static_cast<std::size_t>(q)] = s;
        }
        for (int i = 0; i + 1 < 4; ++i)
            if (!graph.coupler_ok(chain[static_cast<std::size_t>(i)], chain[static_cast<std::size_t>(i) + 1]))
                complain("site " + std::to_string(s) + ": chain link " + std::to_string(i) +
                         " is not an operational coupler");
    }

    for (const auto& fm : embedding.chain_couplers) {
        if (fm.value != -2.0) complain("chain coupler not at -2");
        if (!graph.coupler_ok(fm.a, fm.b)) complain("chain coupler not operational");
    }

    std::vector<int> gadgets_per_vertex(static_cast<std::size_t>(embedding.lattice_rows * embedding.lattice_cols), 0);
    for (const auto& gadget : embedding.vertex_couplers) {
        ++gadgets_per_vertex[static_cast<std::size_t>(gadget.vertex)];
        for (const auto& phys : gadget.physical) {
            if (phys.value < -2.0 || phys.value > 1.0) complain("coupler value outside [-2, 1]");
            if (!graph.coupler_ok(phys.a, phys.b)) complain("vertex coupler not operational");
            const int owner_a = qubit_owner[static_cast<std::size_t>(phys.a)];
            const int owner_b = qubit_owner[static_cast<std::size_t>(phys.b)];
            const bool a_in = owner_a == gadget.site_a || owner_a == gadget.site_b;
            const bool b_in = owner_b == gadget.site_a || owner_b == gadget.site_b;
            if (!a_in || !b_in || owner_a == owner_b) complain("vertex coupler does not cross its two chains");
        }
    }

    IceLattice lattice = embedding.lattice();
    for (int r = 0; r < lattice.rows(); ++r)
        for (int c = 0; c < lattice.cols(); ++c) {
            const int v = lattice.vertex_index(r, c);
            const int expected = lattice.vertex_active(r, c) ? 6 : 0;
            if (gadgets_per_vertex[static_cast<std::size_t>(v)] != expected)
                complain("vertex " + std::to_string(v) + " has " +
                         std::to_string(gadgets_per_vertex[static_cast<std::size_t>(v)]) + " logical bonds, expected " +
                         std::to_string(expected));
        }

    for (int s = 0; s < embedding.site_count(); ++s) {
        const bool vacant = std::find(embedding.vacancies.begin(), embedding.vacancies.end(), s) !=
                            embedding.vacancies.end();
        if (vacant == static_cast<bool>(embedding.chain_present[static_cast<std::size_t>(s)]))
            complain("site " + std::to_string(s) + ": vacancy list and chain presence disagree");
    }

    return problems;
}

Embedding rescale_embedding(const Embedding& embedding, double j_over_jmax, double perp_bias) {
    if (j_over_jmax <= 0.0 || perp_bias <= 0.0) throw ConfigError("rescale factors must be positive");
    Embedding out = embedding;
    for (auto& gadget : out.vertex_couplers) {
        const double old_base = embedding.base_afm * embedding.j_over_jmax *
                                (gadget.parallel ? 1.0 : embedding.perp_bias);
        const double new_base = embedding.base_afm * j_over_jmax * (gadget.parallel ? 1.0 : perp_bias);
        for (auto& phys : gadget.physical) phys.value = std::clamp(phys.value / old_base * new_base, -2.0, 1.0);
    }
    out.j_over_jmax = j_over_jmax;
    out.perp_bias = perp_bias;
    return out;
}

DisorderRealization draw_disorder(const Embedding& embedding, const DisorderModel& model, Rng& rng) {
    model.validate();
    DisorderRealization real;
    std::normal_distribution<double> coupler_noise(0.0, model.coupler_scale);
    std::normal_distribution<double> field_noise(0.0, model.field_scale);
    real.bond_scale_a.reserve(embedding.vertex_couplers.size());
    real.bond_scale_b.reserve(embedding.vertex_couplers.size());
    for (std::size_t i = 0; i < embedding.vertex_couplers.size(); ++i) {
        real.bond_scale_a.push_back(model.coupler_scale > 0.0 ? 1.0 + coupler_noise(rng) : 1.0);
        real.bond_scale_b.push_back(model.coupler_scale > 0.0 ? 1.0 + coupler_noise(rng) : 1.0);
    }
    real.qubit_field.assign(static_cast<std::size_t>(embedding.dims.rows * embedding.dims.cols * 2 * embedding.dims.shore), 0.0);
    if (model.field_scale > 0.0)
        for (auto& f : real.qubit_field) f = field_noise(rng);
    return real;
}

std::vector<LogicalBond> logical_bonds(const Embedding& embedding) {
    std::vector<LogicalBond> bonds;
    for (std::size_t i = 0; i < embedding.vertex_couplers.size(); ++i) {
        const auto& gadget = embedding.vertex_couplers[i];
        bonds.push_back({static_cast<int>(i), gadget.site_a, gadget.site_b, gadget.parallel});
    }
    return bonds;
}

GraphIsingModel logical_model(const Embedding& embedding, const DisorderRealization& disorder) {
    GraphIsingModel model(embedding.site_count());
    for (std::size_t i = 0; i < embedding.vertex_couplers.size(); ++i) {
        const auto& gadget = embedding.vertex_couplers[i];
        const double j = gadget.physical[0].value * disorder.bond_scale_a[i] +
                         gadget.physical[1].value * disorder.bond_scale_b[i];
        model.add_bond(gadget.site_a, gadget.site_b, j);
    }
    for (int s = 0; s < embedding.site_count(); ++s) {
        if (!embedding.chain_present[static_cast<std::size_t>(s)]) continue;
        double h = 0.0;
        for (int q : embedding.chains[static_cast<std::size_t>(s)])
            h += embedding.flux_offset[static_cast<std::size_t>(q)] +
                 (disorder.qubit_field.empty() ? 0.0 : disorder.qubit_field[static_cast<std::size_t>(q)]);
        model.set_field(s, h);
    }
    model.finalize();
    return model;
}

GraphIsingModel chimera_model(const Embedding& embedding, const DisorderRealization& disorder,
                              std::vector<int>& used_qubits) {
    used_qubits.clear();
    std::vector<int> dense_index(static_cast<std::size_t>(embedding.dims.rows * embedding.dims.cols * 2 * embedding.dims.shore), -1);
    for (int s = 0; s < embedding.site_count(); ++s) {
        if (!embedding.chain_present[static_cast<std::size_t>(s)]) continue;
        for (int q : embedding.chains[static_cast<std::size_t>(s)]) {
            dense_index[static_cast<std::size_t>(q)] = static_cast<int>(used_qubits.size());
            used_qubits.push_back(q);
        }
    }
    GraphIsingModel model(static_cast<int>(used_qubits.size()));
    for (const auto& fm : embedding.chain_couplers)
        model.add_bond(dense_index[static_cast<std::size_t>(fm.a)], dense_index[static_cast<std::size_t>(fm.b)],
                       fm.value);
    for (std::size_t i = 0; i < embedding.vertex_couplers.size(); ++i) {
        const auto& gadget = embedding.vertex_couplers[i];
        model.add_bond(dense_index[static_cast<std::size_t>(gadget.physical[0].a)],
                       dense_index[static_cast<std::size_t>(gadget.physical[0].b)],
                       gadget.physical[0].value * disorder.bond_scale_a[i]);
        model.add_bond(dense_index[static_cast<std::size_t>(gadget.physical[1].a)],
                       dense_index[static_cast<std::size_t>(gadget.physical[1].b)],
                       gadget.physical[1].value * disorder.bond_scale_b[i]);
    }
    for (std::size_t d = 0; d < used_qubits.size(); ++d) {
        const int q = used_qubits[d];
        model.set_field(static_cast<int>(d), embedding.flux_offset[static_cast<std::size_t>(q)] +
                                                 (disorder.qubit_field.empty()
                                                      ? 0.0
                                                      : disorder.qubit_field[static_cast<std::size_t>(q)]));
    }
    model.finalize();
    return model;
}

SpinState project_chimera_state(const Embedding& embedding, const std::vector<int>& used_qubits,
                                const std::vector<Spin>& qubit_state) {
    std::vector<int> dense_index(static_cast<std::size_t>(embedding.dims.rows * embedding.dims.cols * 2 * embedding.dims.shore), -1);
    for (std::size_t d = 0; d < used_qubits.size(); ++d) dense_index[static_cast<std::size_t>(used_qubits[d])] = static_cast<int>(d);
    SpinState state;
    state.spins.assign(static_cast<std::size_t>(embedding.site_count()), 0);
    for (int s = 0; s < embedding.site_count(); ++s) {
        if (!embedding.chain_present[static_cast<std::size_t>(s)]) continue;
        int sum = 0;
        for (int q : embedding.chains[static_cast<std::size_t>(s)])
            sum += qubit_state[static_cast<std::size_t>(dense_index[static_cast<std::size_t>(q)])];
        // Majority vote; broken 2-2 chains fall back to the first qubit.
        if (sum > 0)
            state.at(s) = 1;
        else if (sum < 0)
            state.at(s) = -1;
        else
            state.at(s) = qubit_state[static_cast<std::size_t>(
                dense_index[static_cast<std::size_t>(embedding.chains[static_cast<std::size_t>(s)][0])])];
    }
    return state;
}

namespace {

double spread(const std::vector<double>& values) {
    if (values.size() < 2) return 0.0;
    double mean = std::accumulate(values.begin(), values.end(), 0.0) / values.size();
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    return std::sqrt(var / values.size());
}

}  // namespace

RefineResult refine_calibration(const Embedding& embedding, const DisorderModel& disorder, SamplerHandle sampler,
                                const RefineOptions& options) {
    disorder.validate();
    RefineResult result;
    result.embedding = embedding;
    Embedding current = embedding;
    Embedding best = embedding;
    double best_score = -1.0;

    const double threshold = std::max(options.spread_threshold, 0.0);
    auto bonds = logical_bonds(current);

    for (int iter = 0; iter < options.max_iterations; ++iter) {
        CalibrationMeasurement meas = sampler(current);
        if (meas.bond_correlation.size() != bonds.size())
            throw ConfigError("sampler handle returned misaligned bond correlations");

        std::vector<double> par_corr, perp_corr;
        for (std::size_t i = 0; i < bonds.size(); ++i)
            (bonds[i].parallel ? par_corr : perp_corr).push_back(meas.bond_correlation[i]);
        const double s_par = spread(par_corr);
        const double s_perp = spread(perp_corr);
        result.par_spread.push_back(s_par);
        result.perp_spread.push_back(s_perp);
        result.iterations = iter + 1;

        const double score = std::max(s_par, s_perp);
        if (best_score < 0.0 || score < best_score) {
            best_score = score;
            best = current;
        }
        if (s_par <= threshold && s_perp <= threshold) {
            result.converged = true;
            break;
        }

        const double mean_par = par_corr.empty()
                                    ? 0.0
                                    : std::accumulate(par_corr.begin(), par_corr.end(), 0.0) / par_corr.size();
        const double mean_perp = perp_corr.empty()
                                     ? 0.0
                                     : std::accumulate(perp_corr.begin(), perp_corr.end(), 0.0) / perp_corr.size();
        for (std::size_t i = 0; i < bonds.size(); ++i) {
            const double target = bonds[i].parallel ? mean_par : mean_perp;
            if (target == 0.0) continue;
            auto& gadget = current.vertex_couplers[static_cast<std::size_t>(bonds[i].vertex_coupler_index)];
            // A bond measuring more AFM correlation than its class mean is
            // effectively too strong; shrink both physical couplers.
            const double rel_err = (meas.bond_correlation[i] - target) / std::abs(target);
            const double base = current.base_afm * current.j_over_jmax * (gadget.parallel ? 1.0 : current.perp_bias);
            for (auto& phys : gadget.physical) {
                double v = phys.value * (1.0 + options.coupler_gain * rel_err);
                v = std::clamp(v, base * (1.0 - options.max_adjust), base * (1.0 + options.max_adjust));
                phys.value = std::clamp(v, -2.0, 1.0);
            }
        }

        if (!meas.magnetization.empty()) {
            for (int s = 0; s < current.site_count(); ++s) {
                if (!current.chain_present[static_cast<std::size_t>(s)]) continue;
                const double m = meas.magnetization[static_cast<std::size_t>(s)];
                const double shift = -options.field_gain * m * current.base_afm * current.j_over_jmax * 0.25;
                for (int q : current.chains[static_cast<std::size_t>(s)]) {
                    double& offset = current.flux_offset[static_cast<std::size_t>(q)];
                    offset = std::clamp(offset + shift, -0.05, 0.05);
                }
            }
        }
    }

    result.embedding = result.converged ? current : best;
    return result;
}

std::string embedding_to_json(const Embedding& embedding, const ChimeraGraph& graph) {
    nlohmann::json j;
    j["chimera"]["rows"] = embedding.dims.rows;
    j["chimera"]["cols"] = embedding.dims.cols;
    j["chimera"]["shore"] = embedding.dims.shore;
    j["chimera"]["defect_qubits"] = graph.defect_qubits();
    nlohmann::json dead = nlohmann::json::array();
    for (const auto& [a, b] : graph.defect_couplers()) dead.push_back({a, b});
    j["chimera"]["defect_couplers"] = std::move(dead);
    j["lattice"]["rows"] = embedding.lattice_rows;
    j["lattice"]["cols"] = embedding.lattice_cols;
    j["lattice"]["vacancies"] = embedding.vacancies;
    j["base_afm"] = embedding.base_afm;
    j["j_over_jmax"] = embedding.j_over_jmax;
    j["perp_bias"] = embedding.perp_bias;

    nlohmann::json chains = nlohmann::json::array();
    for (int s = 0; s < embedding.site_count(); ++s) {
        if (!embedding.chain_present[static_cast<std::size_t>(s)])
            chains.push_back(nullptr);
        else
            chains.push_back(embedding.chains[static_cast<std::size_t>(s)]);
    }
    j["chains"] = std::move(chains);

    nlohmann::json fm = nlohmann::json::array();
    for (const auto& c : embedding.chain_couplers) fm.push_back({c.a, c.b, c.value});
    j["chain_couplers"] = std::move(fm);

    nlohmann::json gadgets = nlohmann::json::array();
    for (const auto& g : embedding.vertex_couplers) {
        nlohmann::json item;
        item["vertex"] = g.vertex;
        item["site_a"] = g.site_a;
        item["site_b"] = g.site_b;
        item["parallel"] = g.parallel;
        item["physical"] = {{g.physical[0].a, g.physical[0].b, g.physical[0].value},
                            {g.physical[1].a, g.physical[1].b, g.physical[1].value}};
        gadgets.push_back(std::move(item));
    }
    j["vertex_couplers"] = std::move(gadgets);

    nlohmann::json offsets = nlohmann::json::object();
    for (std::size_t q = 0; q < embedding.flux_offset.size(); ++q)
        if (embedding.flux_offset[q] != 0.0) offsets[std::to_string(q)] = embedding.flux_offset[q];
    j["flux_offsets"] = std::move(offsets);
    return j.dump();
}

LoadedEmbedding embedding_from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    ChimeraDims dims{j.at("chimera").at("rows").get<int>(), j.at("chimera").at("cols").get<int>(),
                     j.at("chimera").at("shore").get<int>()};
    std::vector<std::pair<int, int>> dead;
    for (const auto& pair : j.at("chimera").at("defect_couplers"))
        dead.push_back({pair.at(0).get<int>(), pair.at(1).get<int>()});
    ChimeraGraph graph(dims, j.at("chimera").at("defect_qubits").get<std::vector<int>>(), dead);

    Embedding emb;
    emb.dims = dims;
    emb.lattice_rows = j.at("lattice").at("rows").get<int>();
    emb.lattice_cols = j.at("lattice").at("cols").get<int>();
    emb.vacancies = j.at("lattice").at("vacancies").get<std::vector<int>>();
    emb.base_afm = j.at("base_afm").get<double>();
    emb.j_over_jmax = j.at("j_over_jmax").get<double>();
    emb.perp_bias = j.at("perp_bias").get<double>();

    const auto& chains = j.at("chains");
    emb.chain_present.assign(chains.size(), 0);
    emb.chains.assign(chains.size(), {-1, -1, -1, -1});
    for (std::size_t s = 0; s < chains.size(); ++s) {
        if (chains[s].is_null()) continue;
        emb.chain_present[s] = 1;
        for (int i = 0; i < 4; ++i) emb.chains[s][static_cast<std::size_t>(i)] = chains[s].at(static_cast<std::size_t>(i)).get<int>();
    }
    for (const auto& c : j.at("chain_couplers"))
        emb.chain_couplers.push_back({c.at(0).get<int>(), c.at(1).get<int>(), c.at(2).get<double>()});
    for (const auto& g : j.at("vertex_couplers")) {
        GadgetCoupler gadget;
        gadget.vertex = g.at("vertex").get<int>();
        gadget.site_a = g.at("site_a").get<int>();
        gadget.site_b = g.at("site_b").get<int>();
        gadget.parallel = g.at("parallel").get<bool>();
        for (int i = 0; i < 2; ++i) {
            const auto& phys = g.at("physical").at(static_cast<std::size_t>(i));
            gadget.physical[i] = {phys.at(0).get<int>(), phys.at(1).get<int>(), phys.at(2).get<double>()};
        }
        emb.vertex_couplers.push_back(gadget);
    }
    emb.flux_offset.assign(static_cast<std::size_t>(dims.rows * dims.cols * 2 * dims.shore), 0.0);
    for (const auto& [key, value] : j.at("flux_offsets").items())
        emb.flux_offset[static_cast<std::size_t>(std::stoul(key))] = value.get<double>();
    return {std::move(emb), std::move(graph)};
}

}  // namespace qice
