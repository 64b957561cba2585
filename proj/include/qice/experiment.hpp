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

#include <optional>
#include <string>
#include <vector>

#include "qice/embedding.hpp"
#include "qice/observables.hpp"
#include "qice/pinning.hpp"
#include "qice/sampler.hpp"

namespace qice {

/// Declarative description of one experiment: a lattice (direct or via
/// an embedding file), a coupling sweep, exposure and protocol settings,
/// boundary conditions, and the observables to reduce.
struct ExperimentConfig {
    std::string name = "experiment";

    int rows = 8, cols = 8;
    Topology topology = Topology::open_boundary;
    std::vector<int> vacancies;
    std::string embedding_path;  // overrides the direct lattice when set
    bool chimera_mode = false;   // sample the embedded qubit model

    std::vector<double> j_over_jmax{1.0};
    std::vector<double> perp_over_par{1.0};

    double temperature = 1.0 / 12.0;  // units of J_MAX
    double gamma = 0.0;               // units of J_MAX
    std::string exposure_profile;     // "", "chimera-scale", "logical-scale"
    long long sweeps = 1;
    int trotter_slices = 0;
    long long equilibration_sweeps = 0;  // long relaxation before step 0

    ProtocolSpec protocol;
    std::vector<BoundaryCondition> boundaries{BoundaryCondition{}};
    std::vector<std::string> observables{"vertex_frequencies", "monopole_map"};
    QGridSpec structure_factor_grid;
    DisorderModel disorder{0.0, 0.0};

    double budget = 1.0;
    int workers = 1;
    std::string output_dir = "results";

    int effective_repetitions() const;
    double resolved_gamma() const;  // applies the exposure profile
    void validate() const;
};

ExperimentConfig config_from_json(const std::string& text);
std::string config_to_json(const ExperimentConfig& config);
ExperimentConfig load_config(const std::string& path);

/// Built-in presets named after the measurement campaigns they feed:
/// fig2 (vertex frequencies and structure factors over the coupling
/// sweep), fig3 (short-exposure kinetics), fig4 (boundary conditions
/// A-D with screening), figS4 (mixing metrics), figS5 (vacancy-free
/// symmetry-averaged maps).
std::vector<std::string> preset_names();
ExperimentConfig make_preset(const std::string& name);

struct CellResult {
    std::string dir;
    double j_over_jmax = 1.0;
    double perp_over_par = 1.0;
    BoundaryKind boundary = BoundaryKind::open;
    int repetitions = 0;
    int pinned_vertex = -1;
    std::string status = "ok";
    std::string error;
};

struct RunSummary {
    std::string output_dir;
    std::vector<CellResult> cells;
    int failed = 0;
};

/// Executes every (coupling, ratio, boundary) cell of the sweep on a
/// bounded worker pool, persisting chains as NDJSON plus per-cell
/// observables and a manifest.  Deterministic for a fixed seed apart
/// from the manifest timestamp.  Cells that fail leave error records
/// while the rest complete.
RunSummary run_experiment(const ExperimentConfig& config);

struct AnalyzeOptions {
    std::string kind;        // vertex-frequencies | structure-factor | monopole-map | mixing | screening
    std::string cell;        // restrict to one cell directory name (optional)
    std::string probe;       // screening: cell with the pinned monopole
    std::string background;  // screening: flux-injected background cell
};

/// Recomputes observables from stored chains without re-sampling and
/// writes CSV/JSON artifacts under <results>/analysis/.
std::vector<std::string> analyze(const std::string& results_dir, const AnalyzeOptions& options);

/// Applies the QICE_OUTPUT_ROOT override to relative output paths.
std::string resolve_output_dir(const std::string& configured);

}  // namespace qice
