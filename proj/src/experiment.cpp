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

#include "qice/experiment.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace fs = std::filesystem;

namespace qice {

namespace {

constexpr const char* kVersion = "qice 0.1.0";

std::string format_value(double v) {
    std::ostringstream out;
    out << v;
    return out.str();
}

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write file: " + path.string());
    out << text;
}

}  // namespace

int ExperimentConfig::effective_repetitions() const {
    return std::max(1, static_cast<int>(std::llround(protocol.repetitions * budget)));
}

double ExperimentConfig::resolved_gamma() const {
    if (exposure_profile.empty()) return gamma;
    if (exposure_profile == "chimera-scale") return 0.34;
    if (exposure_profile == "logical-scale") return 0.010;
    throw ConfigError("unknown exposure profile '" + exposure_profile + "'");
}

void ExperimentConfig::validate() const {
    if (j_over_jmax.empty()) throw ConfigError("coupling sweep must not be empty");
    if (perp_over_par.empty()) throw ConfigError("ratio sweep must not be empty");
    for (double j : j_over_jmax)
        if (j <= 0.0 || j > 1.0) throw ConfigError("J/J_MAX values must lie in (0, 1]");
    for (double r : perp_over_par)
        if (r <= 0.0) throw ConfigError("J_perp/J_par values must be positive");
    if (temperature <= 0.0) throw ConfigError("temperature must be positive");
    if (resolved_gamma() < 0.0) throw ConfigError("gamma must be non-negative");
    if (sweeps < 0 || equilibration_sweeps < 0) throw ConfigError("sweep counts must be non-negative");
    if (boundaries.empty()) throw ConfigError("boundary list must not be empty");
    if (budget <= 0.0) throw ConfigError("budget must be positive");
    if (workers < 1) throw ConfigError("worker count must be at least 1");
    protocol.validate();
    if (protocol.engine == Engine::pimc && resolved_gamma() <= 0.0)
        throw ConfigError("pimc engine requires gamma > 0");
    if (chimera_mode && embedding_path.empty()) throw ConfigError("chimera mode requires an embedding file");
    if (chimera_mode && protocol.engine != Engine::metropolis)
        throw ConfigError("chimera mode supports the metropolis engine only");
    disorder.validate();
    if (!chimera_mode && (disorder.coupler_scale > 0.0 || disorder.field_scale > 0.0))
        throw ConfigError("disorder applies to chimera-mode runs only");
}

ExperimentConfig config_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    try {
        ExperimentConfig cfg;
        cfg.name = j.value("name", cfg.name);
        if (j.contains("lattice")) {
            const auto& lat = j.at("lattice");
            cfg.rows = lat.value("rows", cfg.rows);
            cfg.cols = lat.value("cols", cfg.cols);
            std::string topo = lat.value("topology", std::string("open"));
            cfg.topology = topo == "torus" ? Topology::torus : Topology::open_boundary;
            cfg.vacancies = lat.value("vacancies", std::vector<int>{});
        }
        cfg.embedding_path = j.value("embedding", std::string{});
        cfg.chimera_mode = j.value("chimera_mode", false);
        if (j.contains("couplings")) {
            const auto& c = j.at("couplings");
            cfg.j_over_jmax = c.value("j_over_jmax", cfg.j_over_jmax);
            cfg.perp_over_par = c.value("perp_over_par", cfg.perp_over_par);
        }
        cfg.temperature = j.value("temperature", cfg.temperature);
        if (j.contains("exposure")) {
            const auto& e = j.at("exposure");
            cfg.gamma = e.value("gamma", cfg.gamma);
            cfg.exposure_profile = e.value("profile", cfg.exposure_profile);
            cfg.sweeps = e.value("sweeps", cfg.sweeps);
            cfg.trotter_slices = e.value("trotter_slices", cfg.trotter_slices);
            cfg.equilibration_sweeps = e.value("equilibration_sweeps", cfg.equilibration_sweeps);
        }
        if (j.contains("protocol")) {
            const auto& p = j.at("protocol");
            cfg.protocol.chain_length = p.value("chain_length", cfg.protocol.chain_length);
            cfg.protocol.burn_in = p.value("burn_in", cfg.protocol.burn_in);
            cfg.protocol.repetitions = p.value("repetitions", cfg.protocol.repetitions);
            cfg.protocol.seed = p.value("seed", cfg.protocol.seed);
            cfg.protocol.engine = engine_from_name(p.value("engine", std::string("metropolis")));
        }
        if (j.contains("boundaries")) {
            cfg.boundaries.clear();
            for (const auto& b : j.at("boundaries")) {
                BoundaryCondition bc;
                bc.kind = boundary_kind_from_name(b.at("kind").get<std::string>());
                bc.flip_site = b.value("flip_site", -1);
                bc.pin_row = b.value("pin_row", -1);
                bc.pin_col = b.value("pin_col", -1);
                cfg.boundaries.push_back(bc);
            }
        }
        cfg.observables = j.value("observables", cfg.observables);
        if (j.contains("structure_factor_grid")) {
            const auto& g = j.at("structure_factor_grid");
            cfg.structure_factor_grid.nx = g.value("nx", cfg.structure_factor_grid.nx);
            cfg.structure_factor_grid.ny = g.value("ny", cfg.structure_factor_grid.ny);
            cfg.structure_factor_grid.qx_min = g.value("qx_min", cfg.structure_factor_grid.qx_min);
            cfg.structure_factor_grid.qx_max = g.value("qx_max", cfg.structure_factor_grid.qx_max);
            cfg.structure_factor_grid.qy_min = g.value("qy_min", cfg.structure_factor_grid.qy_min);
            cfg.structure_factor_grid.qy_max = g.value("qy_max", cfg.structure_factor_grid.qy_max);
        }
        if (j.contains("disorder")) {
            cfg.disorder.coupler_scale = j.at("disorder").value("coupler_scale", 0.0);
            cfg.disorder.field_scale = j.at("disorder").value("field_scale", 0.0);
        }
        cfg.budget = j.value("budget", cfg.budget);
        cfg.workers = j.value("workers", cfg.workers);
        cfg.output_dir = j.value("output", cfg.output_dir);
        return cfg;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config field error: ") + e.what());
    }
}

std::string config_to_json(const ExperimentConfig& cfg) {
    nlohmann::json j;
    j["name"] = cfg.name;
    j["lattice"]["rows"] = cfg.rows;
    j["lattice"]["cols"] = cfg.cols;
    j["lattice"]["topology"] = cfg.topology == Topology::torus ? "torus" : "open";
    j["lattice"]["vacancies"] = cfg.vacancies;
    if (!cfg.embedding_path.empty()) j["embedding"] = cfg.embedding_path;
    j["chimera_mode"] = cfg.chimera_mode;
    j["couplings"]["j_over_jmax"] = cfg.j_over_jmax;
    j["couplings"]["perp_over_par"] = cfg.perp_over_par;
    j["temperature"] = cfg.temperature;
    j["exposure"]["gamma"] = cfg.gamma;
    j["exposure"]["profile"] = cfg.exposure_profile;
    j["exposure"]["sweeps"] = cfg.sweeps;
    j["exposure"]["trotter_slices"] = cfg.trotter_slices;
    j["exposure"]["equilibration_sweeps"] = cfg.equilibration_sweeps;
    j["protocol"]["chain_length"] = cfg.protocol.chain_length;
    j["protocol"]["burn_in"] = cfg.protocol.burn_in;
    j["protocol"]["repetitions"] = cfg.protocol.repetitions;
    j["protocol"]["seed"] = cfg.protocol.seed;
    j["protocol"]["engine"] = engine_name(cfg.protocol.engine);
    nlohmann::json boundaries = nlohmann::json::array();
    for (const auto& bc : cfg.boundaries) {
        nlohmann::json b;
        b["kind"] = boundary_kind_name(bc.kind);
        if (bc.flip_site >= 0) b["flip_site"] = bc.flip_site;
        if (bc.pin_row >= 0) b["pin_row"] = bc.pin_row;
        if (bc.pin_col >= 0) b["pin_col"] = bc.pin_col;
        boundaries.push_back(std::move(b));
    }
    j["boundaries"] = std::move(boundaries);
    j["observables"] = cfg.observables;
    j["structure_factor_grid"]["nx"] = cfg.structure_factor_grid.nx;
    j["structure_factor_grid"]["ny"] = cfg.structure_factor_grid.ny;
    j["structure_factor_grid"]["qx_min"] = cfg.structure_factor_grid.qx_min;
    j["structure_factor_grid"]["qx_max"] = cfg.structure_factor_grid.qx_max;
    j["structure_factor_grid"]["qy_min"] = cfg.structure_factor_grid.qy_min;
    j["structure_factor_grid"]["qy_max"] = cfg.structure_factor_grid.qy_max;
    j["disorder"]["coupler_scale"] = cfg.disorder.coupler_scale;
    j["disorder"]["field_scale"] = cfg.disorder.field_scale;
    j["budget"] = cfg.budget;
    j["workers"] = cfg.workers;
    j["output"] = cfg.output_dir;
    return j.dump(2);
}

ExperimentConfig load_config(const std::string& path) { return config_from_json(read_file(path)); }

std::vector<std::string> preset_names() { return {"fig2", "fig3", "fig4", "figS4", "figS5"}; }

ExperimentConfig make_preset(const std::string& name) {
    ExperimentConfig cfg;
    cfg.protocol.chain_length = 128;
    cfg.protocol.burn_in = 16;
    cfg.protocol.seed = 1;
    cfg.temperature = 1.0 / 12.0;
    if (name == "fig2") {
        cfg.name = "fig2";
        cfg.rows = cfg.cols = 14;
        cfg.j_over_jmax = {1.0 / 32, 1.0 / 16, 1.0 / 8, 1.0 / 4, 1.0 / 2, 1.0};
        cfg.perp_over_par = {0.98, 1.0, 1.02};
        cfg.sweeps = 4096;
        cfg.protocol.repetitions = 200;
        cfg.boundaries = {BoundaryCondition{BoundaryKind::open}};
        cfg.observables = {"vertex_frequencies", "structure_factor", "monopole_map"};
        cfg.output_dir = "results/fig2";
    } else if (name == "fig3") {
        cfg.name = "fig3";
        cfg.rows = cfg.cols = 14;
        cfg.j_over_jmax = {1.0};
        cfg.sweeps = 8;
        cfg.equilibration_sweeps = 16384;
        cfg.protocol.repetitions = 20;
        cfg.boundaries = {BoundaryCondition{BoundaryKind::flux_injected}};
        cfg.observables = {"monopole_map", "mixing"};
        cfg.output_dir = "results/fig3";
    } else if (name == "fig4") {
        cfg.name = "fig4";
        cfg.rows = cfg.cols = 14;
        cfg.j_over_jmax = {1.0 / 8, 1.0 / 4, 1.0};
        cfg.sweeps = 4096;
        cfg.protocol.repetitions = 200;
        cfg.boundaries = {BoundaryCondition{BoundaryKind::open}, BoundaryCondition{BoundaryKind::zero_flux},
                          BoundaryCondition{BoundaryKind::flux_injected},
                          BoundaryCondition{BoundaryKind::pinned_monopole}};
        cfg.observables = {"vertex_frequencies", "monopole_map"};
        cfg.output_dir = "results/fig4";
    } else if (name == "figS4") {
        cfg.name = "figS4";
        cfg.rows = cfg.cols = 8;
        cfg.j_over_jmax = {1.0};
        cfg.temperature = 0.089;
        cfg.exposure_profile = "logical-scale";
        cfg.protocol.engine = Engine::pimc;
        cfg.sweeps = 8;
        cfg.equilibration_sweeps = 8192;
        cfg.protocol.repetitions = 50;
        cfg.boundaries = {BoundaryCondition{BoundaryKind::zero_flux}, BoundaryCondition{BoundaryKind::flux_injected},
                          BoundaryCondition{BoundaryKind::pinned_monopole}};
        cfg.observables = {"mixing", "monopole_map"};
        cfg.output_dir = "results/figS4";
    } else if (name == "figS5") {
        cfg.name = "figS5";
        cfg.rows = cfg.cols = 9;
        cfg.j_over_jmax = {1.0 / 4, 1.0};
        cfg.sweeps = 4096;
        cfg.protocol.repetitions = 200;
        cfg.boundaries = {BoundaryCondition{BoundaryKind::zero_flux}, BoundaryCondition{BoundaryKind::flux_injected},
                          BoundaryCondition{BoundaryKind::pinned_monopole}};
        cfg.observables = {"monopole_map"};
        cfg.output_dir = "results/figS5";
    } else {
        throw ConfigError("unknown preset '" + name + "'");
    }
    return cfg;
}

std::string resolve_output_dir(const std::string& configured) {
    const char* root = std::getenv("QICE_OUTPUT_ROOT");
    if (root && *root && fs::path(configured).is_relative()) return (fs::path(root) / configured).string();
    return configured;
}

namespace {

struct CellPlan {
    int index = 0;
    double j = 1.0;
    double ratio = 1.0;
    BoundaryCondition bc;
    std::string dir_name;
    int pinned_vertex = -1;
};

struct RepOutcome {
    int flipped_site = -1;
    std::string error;
};

struct RunContext {
    ExperimentConfig cfg;
    fs::path out_root;
    IceLattice lattice;
    std::optional<Embedding> embedding;  // present when the lattice came from a file
};

CouplingSpec cell_coupling(double j, double ratio) {
    CouplingSpec coupling;
    coupling.j_par = 1.0;
    coupling.j_perp = ratio;
    coupling.scale = j;
    return coupling;
}

SampleChain run_logical_chain(const RunContext& ctx, const CellPlan& cell, int rep) {
    const ExperimentConfig& cfg = ctx.cfg;
    CouplingSpec coupling = cell_coupling(cell.j, cell.ratio);
    Rng plan_rng = make_rng(derive_seed(cfg.protocol.seed, {0x9147u, static_cast<std::uint64_t>(cell.index),
                                                            static_cast<std::uint64_t>(rep)}));
    BoundaryCondition bc = cell.bc;
    if (bc.kind == BoundaryKind::pinned_monopole && cell.pinned_vertex >= 0) {
        bc.pin_row = cell.pinned_vertex / ctx.lattice.cols();
        bc.pin_col = cell.pinned_vertex % ctx.lattice.cols();
    }
    PinPlan plan = make_pin_plan(ctx.lattice, coupling, bc, plan_rng);

    ExposureParams exposure;
    exposure.gamma = cfg.resolved_gamma();  // units of J_MAX
    exposure.temperature = cfg.temperature;
    exposure.sweeps = cfg.sweeps;
    exposure.trotter_slices = cfg.trotter_slices;

    ProtocolSpec protocol = cfg.protocol;
    std::optional<SpinState> initial;
    if (cfg.equilibration_sweeps > 0) {
        ExposureParams warm = exposure;
        warm.sweeps = cfg.equilibration_sweeps;
        ProtocolSpec warm_protocol = protocol;
        warm_protocol.chain_length = 1;
        warm_protocol.burn_in = 0;
        SampleChain warm_chain =
            run_protocol(ctx.lattice, coupling, plan, warm_protocol, warm,
                         std::nullopt, derive_seed(cfg.protocol.seed, {0xe91u, static_cast<std::uint64_t>(cell.index),
                                                                       static_cast<std::uint64_t>(rep)}));
        initial = warm_chain.states.back();
    }
    return run_protocol(ctx.lattice, coupling, plan, protocol, exposure, initial,
                        derive_seed(cfg.protocol.seed,
                                    {0xc4a1u, static_cast<std::uint64_t>(cell.index), static_cast<std::uint64_t>(rep)}));
}

SampleChain run_chimera_chain(const RunContext& ctx, const CellPlan& cell, int rep, int& flipped_site_out) {
    const ExperimentConfig& cfg = ctx.cfg;
    const Embedding scaled = rescale_embedding(*ctx.embedding, cell.j, cell.ratio);
    Rng disorder_rng = make_rng(derive_seed(cfg.protocol.seed, {0xd150u}));
    DisorderRealization disorder = draw_disorder(scaled, cfg.disorder, disorder_rng);

    std::vector<int> used_qubits;
    GraphIsingModel model = chimera_model(scaled, disorder, used_qubits);

    // Pinning maps onto chains: frozen logical spins freeze their four
    // qubits, logical fields split evenly across the chain.
    CouplingSpec coupling = cell_coupling(cell.j, cell.ratio);
    Rng plan_rng = make_rng(derive_seed(cfg.protocol.seed, {0x9147u, static_cast<std::uint64_t>(cell.index),
                                                            static_cast<std::uint64_t>(rep)}));
    BoundaryCondition bc = cell.bc;
    if (bc.kind == BoundaryKind::pinned_monopole && cell.pinned_vertex >= 0) {
        bc.pin_row = cell.pinned_vertex / ctx.lattice.cols();
        bc.pin_col = cell.pinned_vertex % ctx.lattice.cols();
    }
    // Chimera-level pin fields are in units of the physical coupler scale
    // (J_MAX = 2 * base_afm at full sweep value).
    CouplingSpec chimera_coupling = coupling;
    chimera_coupling.scale = cell.j * 2.0 * scaled.base_afm;
    PinPlan plan = make_pin_plan(ctx.lattice, chimera_coupling, bc, plan_rng);
    flipped_site_out = plan.flipped_site;

    std::vector<int> dense_of_qubit(static_cast<std::size_t>(scaled.dims.rows * scaled.dims.cols * 2 * scaled.dims.shore), -1);
    for (std::size_t d = 0; d < used_qubits.size(); ++d)
        dense_of_qubit[static_cast<std::size_t>(used_qubits[d])] = static_cast<int>(d);
    for (const auto& [site, h] : plan.fields)
        for (int q : scaled.chains[static_cast<std::size_t>(site)])
            model.add_field(dense_of_qubit[static_cast<std::size_t>(q)], h / 4.0);
    std::vector<std::pair<int, Spin>> frozen_dense;
    for (const auto& [site, spin] : plan.frozen)
        for (int q : scaled.chains[static_cast<std::size_t>(site)]) {
            model.set_frozen(dense_of_qubit[static_cast<std::size_t>(q)]);
            frozen_dense.push_back({dense_of_qubit[static_cast<std::size_t>(q)], spin});
        }
    model.finalize();

    // The physical energy unit is the chain coupler scale: J_MAX = 1.92
    // in these units, so a temperature quoted in J_MAX converts by 1.92.
    const double t_phys = cfg.temperature * 2.0 * scaled.base_afm * 2.0;

    Rng rng = make_rng(derive_seed(cfg.protocol.seed,
                                   {0xc4a1u, static_cast<std::uint64_t>(cell.index), static_cast<std::uint64_t>(rep)}));
    std::vector<Spin> qubits(static_cast<std::size_t>(model.size()));
    for (auto& q : qubits) q = random_spin(rng);
    for (const auto& [d, spin] : frozen_dense) qubits[static_cast<std::size_t>(d)] = spin;

    for (long long k = 0; k < cfg.equilibration_sweeps; ++k) model.metropolis_sweep(qubits, t_phys, rng);

    SampleChain chain;
    chain.burn_in = cfg.protocol.burn_in;
    CouplingSpec effective = coupling;
    for (const auto& [site, h] : plan.fields) effective.fields[site] += h;
    LocalCouplings logical_couplings(ctx.lattice, coupling, plan);
    for (int step = 0; step < cfg.protocol.chain_length; ++step) {
        for (long long k = 0; k < cfg.sweeps; ++k) model.metropolis_sweep(qubits, t_phys, rng);
        SpinState state = project_chimera_state(scaled, used_qubits, qubits);
        for (const auto& [site, spin] : plan.frozen) state.at(site) = spin;
        chain.energy.push_back(total_energy(state, ctx.lattice, effective));
        chain.monopoles.push_back(charge_map(state, ctx.lattice).monopole_count());
        int hamming = 0;
        if (!chain.states.empty())
            for (int s : logical_couplings.free_sites)
                if (state.at(s) != chain.states.back().at(s)) ++hamming;
        chain.hamming.push_back(hamming);
        chain.states.push_back(std::move(state));
    }
    return chain;
}

nlohmann::json summarize_frequencies(const std::vector<SampleChain>& chains, const IceLattice& lattice) {
    std::array<double, 4> mean{0, 0, 0, 0};
    int n = 0;
    for (const auto& chain : chains) {
        auto f = vertex_frequencies(chain, lattice);
        for (int t = 0; t < 4; ++t) mean[static_cast<std::size_t>(t)] += f[static_cast<std::size_t>(t)];
        ++n;
    }
    for (auto& v : mean) v /= n;
    nlohmann::json j;
    j["type_i"] = mean[0];
    j["type_ii"] = mean[1];
    j["type_iii"] = mean[2];
    j["type_iv"] = mean[3];
    j["samples"] = n;
    return j;
}

}  // namespace

RunSummary run_experiment(const ExperimentConfig& raw_config) {
    ExperimentConfig cfg = raw_config;
    cfg.validate();

    RunSummary summary;
    fs::path out_root = resolve_output_dir(cfg.output_dir);
    fs::create_directories(out_root);
    fs::create_directories(out_root / "cells");
    summary.output_dir = out_root.string();

    std::optional<Embedding> embedding;
    std::optional<IceLattice> lattice;
    if (!cfg.embedding_path.empty()) {
        LoadedEmbedding loaded = embedding_from_json(read_file(cfg.embedding_path));
        embedding = loaded.embedding;
        lattice.emplace(loaded.embedding.lattice());
    } else {
        lattice.emplace(cfg.rows, cfg.cols, cfg.topology, cfg.vacancies);
    }
    RunContext ctx{cfg, out_root, *lattice, embedding};

    write_file(out_root / "config.json", config_to_json(cfg));
    write_file(out_root / "lattice.json", lattice_to_json(ctx.lattice));

    // One cell per (coupling, ratio, boundary); repetitions are the
    // parallel jobs inside each cell.
    std::vector<CellPlan> cells;
    for (std::size_t ji = 0; ji < cfg.j_over_jmax.size(); ++ji)
        for (std::size_t ri = 0; ri < cfg.perp_over_par.size(); ++ri)
            for (std::size_t bi = 0; bi < cfg.boundaries.size(); ++bi) {
                CellPlan cell;
                cell.index = static_cast<int>(cells.size());
                cell.j = cfg.j_over_jmax[ji];
                cell.ratio = cfg.perp_over_par[ri];
                cell.bc = cfg.boundaries[bi];
                if (cell.bc.kind == BoundaryKind::pinned_monopole) {
                    int r = cell.bc.pin_row >= 0 ? cell.bc.pin_row : ctx.lattice.rows() / 2;
                    int c = cell.bc.pin_col >= 0 ? cell.bc.pin_col : ctx.lattice.cols() / 2;
                    cell.pinned_vertex = ctx.lattice.vertex_index(r, c);
                }
                std::ostringstream dir;
                dir << "c" << cell.index << "_j" << format_value(cell.j) << "_r" << format_value(cell.ratio) << "_"
                    << boundary_kind_name(cell.bc.kind);
                cell.dir_name = dir.str();
                cells.push_back(cell);
            }

    const int reps = cfg.effective_repetitions();
    struct Job {
        int cell;
        int rep;
    };
    std::vector<Job> jobs;
    for (const auto& cell : cells) {
        fs::create_directories(out_root / "cells" / cell.dir_name);
        for (int rep = 0; rep < reps; ++rep) jobs.push_back({cell.index, rep});
    }
    std::vector<RepOutcome> outcomes(jobs.size());

    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        while (true) {
            std::size_t idx = next.fetch_add(1);
            if (idx >= jobs.size()) break;
            const Job& job = jobs[idx];
            const CellPlan& cell = cells[static_cast<std::size_t>(job.cell)];
            RepOutcome& outcome = outcomes[idx];
            try {
                SampleChain chain;
                if (cfg.chimera_mode) {
                    chain = run_chimera_chain(ctx, cell, job.rep, outcome.flipped_site);
                } else {
                    chain = run_logical_chain(ctx, cell, job.rep);
                    // Recover the flipped boundary site for the manifest.
                    if (cell.bc.kind == BoundaryKind::flux_injected) {
                        Rng plan_rng = make_rng(derive_seed(cfg.protocol.seed,
                                                            {0x9147u, static_cast<std::uint64_t>(cell.index),
                                                             static_cast<std::uint64_t>(job.rep)}));
                        CouplingSpec coupling = cell_coupling(cell.j, cell.ratio);
                        outcome.flipped_site = make_pin_plan(ctx.lattice, coupling, cell.bc, plan_rng).flipped_site;
                    }
                }
                char name[32];
                std::snprintf(name, sizeof(name), "rep%03d.ndjson", job.rep);
                std::ofstream out(out_root / "cells" / cell.dir_name / name);
                if (!out) throw std::runtime_error("cannot write chain file");
                write_chain_ndjson(out, chain, ctx.lattice);
            } catch (const std::exception& e) {
                outcome.error = e.what();
            }
        }
    };
    {
        std::vector<std::thread> pool;
        const int n_workers = std::min<int>(cfg.workers, static_cast<int>(jobs.size()));
        for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    // Per-cell observable reduction from the stored chains.
    nlohmann::json manifest_cells = nlohmann::json::array();
    auto has_observable = [&](const char* name) {
        return std::find(cfg.observables.begin(), cfg.observables.end(), name) != cfg.observables.end();
    };
    for (const auto& cell : cells) {
        CellResult result;
        result.dir = (fs::path("cells") / cell.dir_name).string();
        result.j_over_jmax = cell.j;
        result.perp_over_par = cell.ratio;
        result.boundary = cell.bc.kind;
        result.repetitions = reps;
        result.pinned_vertex = cell.pinned_vertex;

        nlohmann::json rep_records = nlohmann::json::array();
        std::vector<SampleChain> chains;
        for (int rep = 0; rep < reps; ++rep) {
            const std::size_t job_idx = static_cast<std::size_t>(cell.index) * reps + rep;
            char name[32];
            std::snprintf(name, sizeof(name), "rep%03d.ndjson", rep);
            nlohmann::json rec;
            rec["file"] = name;
            rec["flipped_site"] = outcomes[job_idx].flipped_site;
            if (!outcomes[job_idx].error.empty()) {
                rec["error"] = outcomes[job_idx].error;
                result.status = "error";
                result.error = outcomes[job_idx].error;
            } else {
                std::ifstream in(out_root / "cells" / cell.dir_name / name);
                chains.push_back(read_chain_ndjson(in, ctx.lattice));
            }
            rep_records.push_back(std::move(rec));
        }

        if (result.status == "ok" && !chains.empty()) {
            try {
                const fs::path cell_dir = out_root / "cells" / cell.dir_name;
                if (has_observable("vertex_frequencies"))
                    write_file(cell_dir / "vertex_frequencies.json", summarize_frequencies(chains, ctx.lattice).dump());
                if (has_observable("monopole_map"))
                    write_file(cell_dir / "monopole_map.json",
                               frequency_map_to_json(monopole_map(chains, ctx.lattice, cell.pinned_vertex)));
                if (has_observable("structure_factor")) {
                    std::vector<const SampleChain*> ptrs;
                    for (const auto& c : chains) ptrs.push_back(&c);
                    write_file(cell_dir / "structure_factor.json",
                               structure_factor_to_json(structure_factor(ptrs, ctx.lattice, cfg.structure_factor_grid)));
                }
                if (has_observable("mixing")) {
                    std::vector<MixingMetrics> metrics;
                    for (const auto& c : chains) metrics.push_back(mixing_metrics(c, cell.bc.kind));
                    MixingAggregate agg = aggregate_mixing(metrics, cfg.protocol.burn_in, 1000, cfg.protocol.seed);
                    nlohmann::json j;
                    j["hamming"] = {{"mean", agg.hamming.mean}, {"lo", agg.hamming.lo}, {"hi", agg.hamming.hi}};
                    j["surplus"] = {{"mean", agg.surplus.mean}, {"lo", agg.surplus.lo}, {"hi", agg.surplus.hi}};
                    write_file(cell_dir / "mixing.json", j.dump());
                }
            } catch (const std::exception& e) {
                result.status = "error";
                result.error = e.what();
            }
        }

        if (result.status != "ok") ++summary.failed;
        nlohmann::json jcell;
        jcell["dir"] = result.dir;
        jcell["j_over_jmax"] = result.j_over_jmax;
        jcell["perp_over_par"] = result.perp_over_par;
        jcell["boundary"] = boundary_kind_name(result.boundary);
        jcell["repetitions"] = result.repetitions;
        jcell["pinned_vertex"] = result.pinned_vertex;
        jcell["status"] = result.status;
        if (!result.error.empty()) jcell["error"] = result.error;
        jcell["reps"] = std::move(rep_records);
        manifest_cells.push_back(std::move(jcell));
        summary.cells.push_back(std::move(result));
    }

    nlohmann::json manifest;
    manifest["name"] = cfg.name;
    manifest["version"] = kVersion;
    manifest["seed"] = cfg.protocol.seed;
    manifest["burn_in"] = cfg.protocol.burn_in;
    manifest["temperature"] = cfg.temperature;
    manifest["gamma"] = cfg.resolved_gamma();
    manifest["sweeps"] = cfg.sweeps;
    manifest["engine"] = engine_name(cfg.protocol.engine);
    manifest["lattice"] = "lattice.json";
    manifest["created"] = static_cast<long long>(
        std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch())
            .count());
    manifest["cells"] = std::move(manifest_cells);
    write_file(out_root / "manifest.json", manifest.dump(2));
    return summary;
}

namespace {

struct StoredCell {
    std::string dir;
    double j = 1.0;
    double ratio = 1.0;
    std::string boundary;
    int pinned_vertex = -1;
    std::vector<std::string> rep_files;
};

struct StoredResults {
    fs::path root;
    IceLattice lattice;
    int burn_in = 0;
    std::uint64_t seed = 0;
    std::vector<StoredCell> cells;
};

StoredResults load_results(const std::string& results_dir) {
    fs::path root = results_dir;
    nlohmann::json manifest = nlohmann::json::parse(read_file((root / "manifest.json").string()));
    StoredResults stored{root, lattice_from_json(read_file((root / manifest.at("lattice").get<std::string>()).string())),
                         manifest.at("burn_in").get<int>(), manifest.at("seed").get<std::uint64_t>(), {}};
    for (const auto& jcell : manifest.at("cells")) {
        if (jcell.at("status").get<std::string>() != "ok") continue;
        StoredCell cell;
        cell.dir = jcell.at("dir").get<std::string>();
        cell.j = jcell.at("j_over_jmax").get<double>();
        cell.ratio = jcell.at("perp_over_par").get<double>();
        cell.boundary = jcell.at("boundary").get<std::string>();
        cell.pinned_vertex = jcell.at("pinned_vertex").get<int>();
        for (const auto& rep : jcell.at("reps"))
            if (!rep.contains("error")) cell.rep_files.push_back(rep.at("file").get<std::string>());
        stored.cells.push_back(std::move(cell));
    }
    return stored;
}

std::vector<SampleChain> load_cell_chains(const StoredResults& stored, const StoredCell& cell) {
    std::vector<SampleChain> chains;
    for (const auto& file : cell.rep_files) {
        std::ifstream in(stored.root / cell.dir / file);
        if (!in) throw std::runtime_error("missing chain file: " + (stored.root / cell.dir / file).string());
        chains.push_back(read_chain_ndjson(in, stored.lattice));
    }
    if (chains.empty()) throw std::runtime_error("cell has no chains: " + cell.dir);
    return chains;
}

std::string cell_name_of(const StoredCell& cell) { return fs::path(cell.dir).filename().string(); }

}  // namespace

std::vector<std::string> analyze(const std::string& results_dir, const AnalyzeOptions& options) {
    StoredResults stored = load_results(results_dir);
    fs::path analysis = stored.root / "analysis";
    fs::create_directories(analysis);
    std::vector<std::string> written;

    auto matches = [&](const StoredCell& cell) { return options.cell.empty() || cell_name_of(cell) == options.cell; };

    if (options.kind == "vertex-frequencies") {
        std::ostringstream csv;
        csv << "cell,j_over_jmax,perp_over_par,boundary,type_i,type_ii,type_iii,type_iv\n";
        csv.precision(17);
        for (const auto& cell : stored.cells) {
            if (!matches(cell)) continue;
            auto chains = load_cell_chains(stored, cell);
            std::array<double, 4> mean{0, 0, 0, 0};
            for (const auto& chain : chains) {
                auto f = vertex_frequencies(chain, stored.lattice);
                for (int t = 0; t < 4; ++t) mean[static_cast<std::size_t>(t)] += f[static_cast<std::size_t>(t)];
            }
            for (auto& v : mean) v /= chains.size();
            csv << cell_name_of(cell) << ',' << cell.j << ',' << cell.ratio << ',' << cell.boundary << ',' << mean[0]
                << ',' << mean[1] << ',' << mean[2] << ',' << mean[3] << '\n';
        }
        fs::path out = analysis / "vertex_frequencies.csv";
        write_file(out, csv.str());
        written.push_back(out.string());
    } else if (options.kind == "structure-factor") {
        fs::create_directories(analysis / "structure_factor");
        for (const auto& cell : stored.cells) {
            if (!matches(cell)) continue;
            auto chains = load_cell_chains(stored, cell);
            std::vector<const SampleChain*> ptrs;
            for (const auto& c : chains) ptrs.push_back(&c);
            QGridSpec grid;
            fs::path out = analysis / "structure_factor" / (cell_name_of(cell) + ".json");
            write_file(out, structure_factor_to_json(structure_factor(ptrs, stored.lattice, grid)));
            written.push_back(out.string());
        }
    } else if (options.kind == "monopole-map") {
        fs::create_directories(analysis / "monopole_map");
        for (const auto& cell : stored.cells) {
            if (!matches(cell)) continue;
            auto chains = load_cell_chains(stored, cell);
            fs::path out = analysis / "monopole_map" / (cell_name_of(cell) + ".json");
            write_file(out, frequency_map_to_json(monopole_map(chains, stored.lattice, cell.pinned_vertex)));
            written.push_back(out.string());
        }
    } else if (options.kind == "mixing") {
        std::ostringstream csv;
        csv << "cell,boundary,hamming_mean,hamming_lo,hamming_hi,surplus_mean,surplus_lo,surplus_hi\n";
        csv.precision(17);
        for (const auto& cell : stored.cells) {
            if (!matches(cell)) continue;
            auto chains = load_cell_chains(stored, cell);
            std::vector<MixingMetrics> metrics;
            for (const auto& c : chains) metrics.push_back(mixing_metrics(c, boundary_kind_from_name(cell.boundary)));
            MixingAggregate agg = aggregate_mixing(metrics, stored.burn_in, 1000, stored.seed);
            csv << cell_name_of(cell) << ',' << cell.boundary << ',' << agg.hamming.mean << ',' << agg.hamming.lo << ','
                << agg.hamming.hi << ',' << agg.surplus.mean << ',' << agg.surplus.lo << ',' << agg.surplus.hi << '\n';
        }
        fs::path out = analysis / "mixing.csv";
        write_file(out, csv.str());
        written.push_back(out.string());
    } else if (options.kind == "screening") {
        if (options.probe.empty() || options.background.empty())
            throw ConfigError("screening analysis needs --probe and --background cells");
        const StoredCell* probe = nullptr;
        const StoredCell* background = nullptr;
        for (const auto& cell : stored.cells) {
            if (cell_name_of(cell) == options.probe) probe = &cell;
            if (cell_name_of(cell) == options.background) background = &cell;
        }
        if (!probe || !background) throw ConfigError("screening cells not found in manifest");
        if (probe->pinned_vertex < 0) throw ConfigError("probe cell has no pinned vertex");
        auto probe_chains = load_cell_chains(stored, *probe);
        auto bg_chains = load_cell_chains(stored, *background);
        FrequencyMap map_d = monopole_map(probe_chains, stored.lattice, probe->pinned_vertex);
        FrequencyMap map_c = monopole_map(bg_chains, stored.lattice);
        const int pin_r = probe->pinned_vertex / stored.lattice.cols();
        const int pin_c = probe->pinned_vertex % stored.lattice.cols();
        ScreeningProfile profile = screening_profile(map_d, map_c, pin_r, pin_c);
        fs::create_directories(analysis / "screening");
        fs::path csv_out = analysis / "screening" / (options.probe + "__" + options.background + ".csv");
        write_file(csv_out, screening_profile_to_csv(profile));
        written.push_back(csv_out.string());
        nlohmann::json fit;
        fit["amplitude"] = profile.amplitude;
        fit["xi"] = profile.xi;
        fit["rms_residual"] = profile.rms_residual;
        fit["rel_residual"] = profile.rel_residual;
        fit["fit_ok"] = profile.fit_ok;
        fs::path fit_out = analysis / "screening" / (options.probe + "__" + options.background + "_fit.json");
        write_file(fit_out, fit.dump());
        written.push_back(fit_out.string());
    } else {
        throw ConfigError("unknown analysis kind '" + options.kind + "'");
    }
    return written;
}

}  // namespace qice
