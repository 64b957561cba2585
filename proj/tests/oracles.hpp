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

// Independent oracles for the test and acceptance suites.  These follow
// deliberately different evaluation routes than the library: pairwise
// edge-list energies derived from site geometry, exhaustive state
// enumeration, and dense exact diagonalization of the transverse-field
// model on small lattices.

#pragma once

#include <array>
#include <functional>
#include <vector>

#include "qice/lattice.hpp"
#include "qice/observables.hpp"

namespace qice::oracle {

/// Pairwise Hamiltonian evaluation from site geometry alone: two
/// non-vacant sites couple once per shared active vertex, at j_par when
/// their orientations match and j_perp otherwise.
double edge_list_energy(const SpinState& state, const IceLattice& lattice, const CouplingSpec& coupling);

/// Calls fn for every spin assignment of the non-vacant sites.
void for_each_state(const IceLattice& lattice, const std::function<void(const SpinState&)>& fn);

/// All states satisfying the ice rule at every active vertex (DFS with
/// vertex-level pruning).
std::vector<SpinState> enumerate_ice_states(const IceLattice& lattice);

/// Compact key of a state over non-vacant sites (for histogram maps).
std::uint64_t state_key(const SpinState& state, const IceLattice& lattice);

/// Dense exact diagonalization of
///   H = E_cl(sigma^z) - gamma * sum_i sigma^x_i
/// over all non-vacant sites; the classical part is evaluated through
/// the edge-list oracle.  Usable up to ~12 spins.
class ExactDiagonalization {
  public:
    ExactDiagonalization(const IceLattice& lattice, const CouplingSpec& coupling, double gamma);

    int spin_count() const { return n_; }
    const std::vector<int>& sites() const { return sites_; }

    /// Thermal <sigma^z_a sigma^z_b> at temperature T (site indices into sites()).
    double thermal_zz(int a, int b, double temperature) const;
    /// Thermal <sigma^x> averaged over spins.
    double thermal_sx(double temperature) const;
    /// Diagonal (computational-basis) probabilities at temperature T.
    std::vector<double> diagonal_distribution(double temperature) const;
    /// Classical energy of basis state `index`.
    double classical_energy(std::size_t index) const { return diag_[index]; }

  private:
    int n_;
    std::vector<int> sites_;
    std::vector<double> diag_;
    std::vector<double> eigenvalues_;
    std::vector<double> eigenvectors_;  // column-major, [state + dim*k]

    std::vector<double> boltzmann_weights(double temperature) const;
};

struct MultinomialCheck {
    int bins = 0;
    int exceeding_3sigma = 0;
    double max_abs_z = 0.0;
    double exceed_fraction = 0.0;
};

/// Per-bin z-scores of observed counts against expected probabilities.
/// Under the null ~0.27% of bins exceed |z|=3, so a correct sampler
/// keeps the exceedance fraction near that and max |z| modest.
MultinomialCheck check_multinomial(const std::vector<long long>& counts, const std::vector<double>& probs);

}  // namespace qice::oracle
