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

// Experiment runner for the qubit square-ice simulator.  Subcommands:
//   run       execute an experiment config (or preset) and persist results
//   analyze   recompute observables from stored chains
//   embed     generate and validate chimera embeddings
//   validate  check a config or embedding file without running
//   presets   list or emit the built-in experiment presets
//
// Exit codes: 0 success, 2 configuration error, 3 runtime error,
// 4 partial failure (some work cells failed).

#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"

#include "qice/experiment.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;
constexpr int kExitPartial = 4;

int cmd_run(const std::string& config_path, const std::string& preset, std::uint64_t seed, bool seed_set,
            double budget, bool budget_set, int workers, bool workers_set, const std::string& output) {
    qice::ExperimentConfig cfg;
    if (!preset.empty())
        cfg = qice::make_preset(preset);
    else if (!config_path.empty())
        cfg = qice::load_config(config_path);
    else
        throw qice::ConfigError("run needs --config or --preset");
    if (seed_set) cfg.protocol.seed = seed;
    if (budget_set) cfg.budget = budget;
    if (workers_set) cfg.workers = workers;
    if (!output.empty()) cfg.output_dir = output;

    qice::RunSummary summary = qice::run_experiment(cfg);
    std::cout << "wrote " << summary.cells.size() << " cells to " << summary.output_dir << "\n";
    for (const auto& cell : summary.cells)
        if (cell.status != "ok") std::cerr << "cell " << cell.dir << " failed: " << cell.error << "\n";
    if (summary.failed == static_cast<int>(summary.cells.size())) return kExitRuntime;
    return summary.failed > 0 ? kExitPartial : kExitOk;
}

int cmd_analyze(const std::string& results, const qice::AnalyzeOptions& options) {
    auto written = qice::analyze(results, options);
    for (const auto& file : written) std::cout << file << "\n";
    return kExitOk;
}

int cmd_embed(int rows, int cols, std::uint64_t seed, int count, const std::string& defects_path,
              const std::string& output) {
    std::vector<int> defect_qubits;
    std::vector<std::pair<int, int>> defect_couplers;
    if (!defects_path.empty()) {
        std::ifstream in(defects_path);
        if (!in) throw qice::ConfigError("cannot open defects file: " + defects_path);
        nlohmann::json j = nlohmann::json::parse(in);
        defect_qubits = j.value("qubits", std::vector<int>{});
        for (const auto& pair : j.value("couplers", nlohmann::json::array()))
            defect_couplers.push_back({pair.at(0).get<int>(), pair.at(1).get<int>()});
    }
    qice::ChimeraGraph graph = qice::build_chimera({rows, cols, 4}, defect_qubits, defect_couplers);
    std::cout << "chimera " << rows << "x" << cols << ": " << graph.operational_qubit_count() << "/"
              << graph.qubit_count() << " qubits, " << graph.operational_coupler_count() << "/"
              << graph.coupler_count() << " couplers operational\n";

    fs::create_directories(output);
    for (int i = 0; i < count; ++i) {
        qice::Rng rng = qice::make_rng(qice::derive_seed(seed, {static_cast<std::uint64_t>(i)}));
        qice::EmbedResult result = qice::embed_ice(graph, rng);
        auto problems = qice::validate_embedding(graph, result.embedding);
        if (!problems.empty()) {
            for (const auto& p : problems) std::cerr << "embedding " << i << ": " << p << "\n";
            return kExitRuntime;
        }
        char name[32];
        std::snprintf(name, sizeof(name), "embedding%03d.json", i);
        std::ofstream out(fs::path(output) / name);
        out << qice::embedding_to_json(result.embedding, graph);
        std::cout << name << ": " << result.embedding.vacancies.size() << " vacancies, "
                  << result.lattice.active_vertex_count() << " active vertices\n";
    }
    return kExitOk;
}

int cmd_validate(const std::string& config_path, const std::string& embedding_path) {
    if (!config_path.empty()) {
        qice::ExperimentConfig cfg = qice::load_config(config_path);
        cfg.validate();
        std::cout << "config ok: " << cfg.name << "\n";
    }
    if (!embedding_path.empty()) {
        std::ifstream in(embedding_path);
        if (!in) throw qice::ConfigError("cannot open embedding file: " + embedding_path);
        std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        qice::LoadedEmbedding loaded = qice::embedding_from_json(text);
        auto problems = qice::validate_embedding(loaded.graph, loaded.embedding);
        if (!problems.empty()) {
            for (const auto& p : problems) std::cerr << p << "\n";
            return kExitRuntime;
        }
        std::cout << "embedding ok: " << loaded.embedding.lattice_rows << "x" << loaded.embedding.lattice_cols
                  << " lattice, " << loaded.embedding.vacancies.size() << " vacancies\n";
    }
    if (config_path.empty() && embedding_path.empty())
        throw qice::ConfigError("validate needs --config or --embedding");
    return kExitOk;
}

int cmd_presets(const std::string& emit_dir) {
    if (emit_dir.empty()) {
        for (const auto& name : qice::preset_names()) std::cout << name << "\n";
        return kExitOk;
    }
    fs::create_directories(emit_dir);
    for (const auto& name : qice::preset_names()) {
        std::ofstream out(fs::path(emit_dir) / (name + ".json"));
        out << qice::config_to_json(qice::make_preset(name));
        std::cout << (fs::path(emit_dir) / (name + ".json")).string() << "\n";
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"qubit square-ice simulator and analysis toolkit"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "execute an experiment");
    std::string run_config, run_preset, run_output;
    std::uint64_t run_seed = 0;
    double run_budget = 1.0;
    int run_workers = 1;
    run->add_option("--config", run_config, "experiment config file");
    run->add_option("--preset", run_preset, "built-in preset name");
    auto* seed_opt = run->add_option("--seed", run_seed, "override the protocol seed");
    auto* budget_opt = run->add_option("--budget", run_budget, "sample budget multiplier");
    auto* workers_opt = run->add_option("--workers", run_workers, "worker pool size");
    run->add_option("--output", run_output, "output directory override");

    auto* analyze = app.add_subcommand("analyze", "recompute observables from stored chains");
    std::string an_results;
    qice::AnalyzeOptions an_options;
    analyze->add_option("--results", an_results, "results directory")->required();
    analyze->add_option("--kind", an_options.kind,
                        "vertex-frequencies | structure-factor | monopole-map | mixing | screening")
        ->required();
    analyze->add_option("--cell", an_options.cell, "restrict to one cell");
    analyze->add_option("--probe", an_options.probe, "screening: pinned-monopole cell");
    analyze->add_option("--background", an_options.background, "screening: flux-injected background cell");

    auto* embed = app.add_subcommand("embed", "generate chimera embeddings");
    int em_rows = 16, em_cols = 16, em_count = 1;
    std::uint64_t em_seed = 1;
    std::string em_defects, em_output = "embeddings";
    embed->add_option("--rows", em_rows, "chimera cell rows");
    embed->add_option("--cols", em_cols, "chimera cell cols");
    embed->add_option("--seed", em_seed, "embedding seed");
    embed->add_option("--count", em_count, "number of embeddings");
    embed->add_option("--defects", em_defects, "JSON file with defect qubits/couplers");
    embed->add_option("--output", em_output, "output directory");

    auto* validate = app.add_subcommand("validate", "check a config or embedding");
    std::string va_config, va_embedding;
    validate->add_option("--config", va_config, "experiment config file");
    validate->add_option("--embedding", va_embedding, "embedding file");

    auto* presets = app.add_subcommand("presets", "list or emit built-in presets");
    std::string pr_emit;
    presets->add_option("--emit", pr_emit, "write preset configs to this directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed())
            return cmd_run(run_config, run_preset, run_seed, seed_opt->count() > 0, run_budget,
                           budget_opt->count() > 0, run_workers, workers_opt->count() > 0, run_output);
        if (analyze->parsed()) return cmd_analyze(an_results, an_options);
        if (embed->parsed()) return cmd_embed(em_rows, em_cols, em_seed, em_count, em_defects, em_output);
        if (validate->parsed()) return cmd_validate(va_config, va_embedding);
        if (presets->parsed()) return cmd_presets(pr_emit);
    } catch (const qice::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitOk;
}
