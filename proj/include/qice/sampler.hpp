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

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "qice/lattice.hpp"
#include "qice/pinning.hpp"
#include "qice/rng.hpp"

namespace qice {

enum class Engine { metropolis, loop, pimc };

const char* engine_name(Engine engine);
Engine engine_from_name(const std::string& name);

/// One exposure to fluctuations: transverse field gamma, temperature,
/// and the sweep count standing in for the hardware pause duration.
struct ExposureParams {
    double gamma = 0.0;
    double temperature = 1.0;
    long long sweeps = 1;
    /// Trotter slice count for the pimc engine; 0 picks the default
    /// max(16, ceil(4*gamma/temperature)).
    int trotter_slices = 0;

    void validate() const {
        if (temperature <= 0.0) throw ConfigError("temperature must be positive");
        if (gamma < 0.0) throw ConfigError("gamma must be non-negative");
        if (sweeps < 0) throw ConfigError("sweep count must be non-negative");
    }
};

int default_trotter_slices(double gamma, double temperature);

struct ProtocolSpec {
    int chain_length = 128;
    int burn_in = 16;
    int repetitions = 1;
    std::uint64_t seed = 0;
    Engine engine = Engine::metropolis;

    void validate() const {
        if (chain_length < 1) throw ConfigError("chain length must be at least 1");
        if (burn_in < 0 || burn_in >= chain_length) throw ConfigError("burn-in must be below chain length");
        if (repetitions < 1) throw ConfigError("repetitions must be at least 1");
    }
};

/// Ordered classical output states of one strobed run, with per-step
/// metadata.  The first `burn_in` states are flagged for discard.
struct SampleChain {
    int burn_in = 0;
    std::vector<SpinState> states;
    std::vector<double> energy;
    std::vector<int> monopoles;
    std::vector<int> hamming;  // distance to predecessor over free sites; 0 at step 0

    int size() const { return static_cast<int>(states.size()); }
    bool is_burn_in(int step) const { return step < burn_in; }
};

/// Per-site couplings of the checkerboard Hamiltonian flattened for the
/// update kernels: CSR partner lists (through active vertices only),
/// longitudinal fields, and the free-site list after freezing.
struct LocalCouplings {
    int n_sites = 0;
    std::vector<int> offsets;
    std::vector<int> partner;
    std::vector<double> strength;
    std::vector<double> field;
    std::vector<std::uint8_t> frozen;
    std::vector<int> free_sites;

    LocalCouplings() = default;
    LocalCouplings(const IceLattice& lattice, const CouplingSpec& coupling, const PinPlan& plan);

    /// Energy change of flipping `site` in `state`.
    double flip_delta(const SpinState& state, int site) const {
        double local = field[static_cast<std::size_t>(site)];
        for (int k = offsets[static_cast<std::size_t>(site)]; k < offsets[static_cast<std::size_t>(site) + 1]; ++k)
            local += strength[static_cast<std::size_t>(k)] * state.at(partner[static_cast<std::size_t>(k)]);
        return -2.0 * state.at(site) * local;
    }
};

struct SweepStats {
    long long proposed = 0;
    long long accepted = 0;
};

/// One pass of single-spin Metropolis updates (|free| uniformly random
/// proposals) with stationary distribution exp(-E/T).
SweepStats metropolis_sweep(SpinState& state, const LocalCouplings& couplings, double temperature, Rng& rng);

struct LoopResult {
    bool flipped = false;
    int length = 0;  // edges on the flipped cycle
};

/// Ergodic ice-manifold move: walks with the dipole arrows from a random
/// active vertex, choosing uniformly between the two outgoing edges,
/// until it revisits a vertex, then reverses the enclosed cycle.  All
/// vertex charges are preserved exactly.  The walk aborts (state
/// unchanged) if it meets a charged or inactive vertex, a dangling edge,
/// or a pinned spin.
LoopResult loop_update(SpinState& state, const IceLattice& lattice, const LocalCouplings& couplings, Rng& rng);

/// Imaginary-time trajectories: one Ising value per (site, slice),
/// periodic in the slice direction.
struct WorldlineSet {
    int n_sites = 0;
    int slices = 0;
    std::vector<Spin> data;  // site-major

    WorldlineSet() = default;
    WorldlineSet(int sites, int m) : n_sites(sites), slices(m), data(static_cast<std::size_t>(sites) * m, 0) {}

    Spin at(int site, int m) const { return data[static_cast<std::size_t>(site) * slices + m]; }
    Spin& at(int site, int m) { return data[static_cast<std::size_t>(site) * slices + m]; }

    /// All slices replicated from a classical state.
    static WorldlineSet replicate(const SpinState& state, int m);
};

/// Suzuki-Trotter sampler for the transverse-field model at (gamma, T).
/// One sweep = local (site,slice) flips, temporal cluster flips, and
/// whole-worldline flips, each in detailed balance with the action.
class PimcKernel {
  public:
    PimcKernel(const IceLattice& lattice, const CouplingSpec& coupling, const PinPlan& plan,
               const ExposureParams& exposure);

    int slices() const { return slices_; }
    const LocalCouplings& couplings() const { return couplings_; }

    void sweep(WorldlineSet& wl, Rng& rng) const;

  private:
    LocalCouplings couplings_;
    int slices_;
    double dtau_;          // beta / M
    double temporal_k_;    // -(1/2) ln tanh(beta*gamma/M)
    double p_add_;         // 1 - exp(-2K), cluster bond probability

    double spatial_flip_delta(const WorldlineSet& wl, int site, int m) const;
};

/// Projects worldlines to a classical state by reading one imaginary-time
/// slice chosen uniformly at random.
SpinState quench_readout(const WorldlineSet& worldlines, Rng& rng);

/// Runs the strobed relaxation protocol: starting from `initial` (or a
/// random state over free spins), alternately exposes the system to
/// fluctuations for `exposure.sweeps` sweeps of the chosen engine and
/// reads out a classical state.  Pinned spins never change.  `stream`
/// derives the RNG so repetitions parallelize reproducibly.
SampleChain run_protocol(const IceLattice& lattice, const CouplingSpec& coupling, const PinPlan& plan,
                         const ProtocolSpec& protocol, const ExposureParams& exposure,
                         const std::optional<SpinState>& initial = std::nullopt, std::uint64_t stream = 0);

/// Newline-delimited JSON records (step, burn_in, spins, energy,
/// monopoles, hamming), one line per chain state.
void write_chain_ndjson(std::ostream& out, const SampleChain& chain, const IceLattice& lattice);
SampleChain read_chain_ndjson(std::istream& in, const IceLattice& lattice);

}  // namespace qice
