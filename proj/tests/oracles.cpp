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

#include "oracles.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace qice::oracle {

double edge_list_energy(const SpinState& state, const IceLattice& lattice, const CouplingSpec& coupling) {
    double energy = 0.0;
    const int n = lattice.site_count();
    for (int a = 0; a < n; ++a) {
        if (lattice.vacant(a)) continue;
        auto adj_a = lattice.adjacent_vertices(a);
        for (int b = a + 1; b < n; ++b) {
            if (lattice.vacant(b)) continue;
            auto adj_b = lattice.adjacent_vertices(b);
            int shared = 0;
            for (int va : adj_a) {
                if (va < 0 || !lattice.vertex_active(va)) continue;
                for (int vb : adj_b)
                    if (vb == va) ++shared;
            }
            if (shared == 0) continue;
            const bool collinear = lattice.is_horizontal(a) == lattice.is_horizontal(b);
            const double j = collinear ? coupling.eff_par() : coupling.eff_perp();
            energy += shared * j * state.at(a) * state.at(b);
        }
    }
    for (int a = 0; a < n; ++a)
        if (!lattice.vacant(a)) energy += coupling.field(a) * state.at(a);
    return energy;
}

void for_each_state(const IceLattice& lattice, const std::function<void(const SpinState&)>& fn) {
    std::vector<int> sites;
    for (int s = 0; s < lattice.site_count(); ++s)
        if (!lattice.vacant(s)) sites.push_back(s);
    if (sites.size() > 24) throw std::invalid_argument("lattice too large for exhaustive enumeration");
    SpinState state;
    state.spins.assign(static_cast<std::size_t>(lattice.site_count()), 0);
    const std::uint64_t total = 1ull << sites.size();
    for (std::uint64_t mask = 0; mask < total; ++mask) {
        for (std::size_t k = 0; k < sites.size(); ++k)
            state.at(sites[k]) = (mask >> k) & 1ull ? Spin{1} : Spin{-1};
        fn(state);
    }
}

std::vector<SpinState> enumerate_ice_states(const IceLattice& lattice) {
    std::vector<int> sites;
    for (int s = 0; s < lattice.site_count(); ++s)
        if (!lattice.vacant(s)) sites.push_back(s);
    std::vector<int> site_pos(static_cast<std::size_t>(lattice.site_count()), -1);

    // Order sites by first appearance in a row-major vertex walk so each
    // vertex closes as early as possible.
    std::vector<int> order;
    std::vector<std::array<int, 4>> vertices;
    for (int r = 0; r < lattice.rows(); ++r)
        for (int c = 0; c < lattice.cols(); ++c) {
            if (!lattice.vertex_active(r, c)) continue;
            vertices.push_back(lattice.vertex_sites(r, c));
            for (int s : vertices.back())
                if (site_pos[static_cast<std::size_t>(s)] < 0) {
                    site_pos[static_cast<std::size_t>(s)] = static_cast<int>(order.size());
                    order.push_back(s);
                }
        }
    for (int s : sites)
        if (site_pos[static_cast<std::size_t>(s)] < 0) {
            site_pos[static_cast<std::size_t>(s)] = static_cast<int>(order.size());
            order.push_back(s);
        }

    std::vector<std::vector<std::size_t>> closing(order.size());
    for (std::size_t v = 0; v < vertices.size(); ++v) {
        int last = 0;
        for (int s : vertices[v]) last = std::max(last, site_pos[static_cast<std::size_t>(s)]);
        closing[static_cast<std::size_t>(last)].push_back(v);
    }

    std::vector<SpinState> out;
    SpinState state;
    state.spins.assign(static_cast<std::size_t>(lattice.site_count()), 0);
    std::function<void(std::size_t)> rec = [&](std::size_t i) {
        if (i == order.size()) {
            out.push_back(state);
            return;
        }
        for (Spin v : {Spin{1}, Spin{-1}}) {
            state.at(order[i]) = v;
            bool ok = true;
            for (std::size_t vi : closing[i]) {
                int sum = 0;
                for (int s : vertices[vi]) sum += state.at(s);
                if (sum != 0) {
                    ok = false;
                    break;
                }
            }
            if (ok) rec(i + 1);
        }
        state.at(order[i]) = 0;
    };
    rec(0);
    return out;
}

std::uint64_t state_key(const SpinState& state, const IceLattice& lattice) {
    std::uint64_t key = 0;
    std::uint64_t bit = 1;
    for (int s = 0; s < lattice.site_count(); ++s) {
        if (lattice.vacant(s)) continue;
        if (state.at(s) > 0) key |= bit;
        bit <<= 1;
    }
    return key;
}

ExactDiagonalization::ExactDiagonalization(const IceLattice& lattice, const CouplingSpec& coupling, double gamma) {
    for (int s = 0; s < lattice.site_count(); ++s)
        if (!lattice.vacant(s)) sites_.push_back(s);
    n_ = static_cast<int>(sites_.size());
    if (n_ > 12) throw std::invalid_argument("exact diagonalization limited to 12 spins");
    const std::size_t dim = 1ull << n_;

    SpinState state;
    state.spins.assign(static_cast<std::size_t>(lattice.site_count()), 0);
    diag_.resize(dim);
    for (std::size_t mask = 0; mask < dim; ++mask) {
        for (int k = 0; k < n_; ++k)
            state.at(sites_[static_cast<std::size_t>(k)]) = (mask >> k) & 1ull ? Spin{1} : Spin{-1};
        diag_[mask] = edge_list_energy(state, lattice, coupling);
    }

    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
    for (std::size_t mask = 0; mask < dim; ++mask) {
        h(static_cast<Eigen::Index>(mask), static_cast<Eigen::Index>(mask)) = diag_[mask];
        for (int k = 0; k < n_; ++k)
            h(static_cast<Eigen::Index>(mask ^ (1ull << k)), static_cast<Eigen::Index>(mask)) = -gamma;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(h);
    eigenvalues_.assign(solver.eigenvalues().data(), solver.eigenvalues().data() + dim);
    eigenvectors_.assign(solver.eigenvectors().data(), solver.eigenvectors().data() + dim * dim);
}

std::vector<double> ExactDiagonalization::boltzmann_weights(double temperature) const {
    const std::size_t dim = diag_.size();
    const double e0 = *std::min_element(eigenvalues_.begin(), eigenvalues_.end());
    std::vector<double> w(dim);
    double z = 0.0;
    for (std::size_t k = 0; k < dim; ++k) {
        w[k] = std::exp(-(eigenvalues_[k] - e0) / temperature);
        z += w[k];
    }
    for (auto& v : w) v /= z;
    return w;
}

std::vector<double> ExactDiagonalization::diagonal_distribution(double temperature) const {
    const std::size_t dim = diag_.size();
    const auto w = boltzmann_weights(temperature);
    std::vector<double> p(dim, 0.0);
    for (std::size_t k = 0; k < dim; ++k) {
        const double* column = eigenvectors_.data() + dim * k;
        for (std::size_t s = 0; s < dim; ++s) p[s] += w[k] * column[s] * column[s];
    }
    return p;
}

double ExactDiagonalization::thermal_zz(int a, int b, double temperature) const {
    const auto p = diagonal_distribution(temperature);
    double zz = 0.0;
    for (std::size_t s = 0; s < p.size(); ++s) {
        const int sa = (s >> a) & 1ull ? 1 : -1;
        const int sb = (s >> b) & 1ull ? 1 : -1;
        zz += p[s] * sa * sb;
    }
    return zz;
}

double ExactDiagonalization::thermal_sx(double temperature) const {
    const std::size_t dim = diag_.size();
    const auto w = boltzmann_weights(temperature);
    double sx = 0.0;
    for (std::size_t k = 0; k < dim; ++k) {
        const double* column = eigenvectors_.data() + dim * k;
        double contrib = 0.0;
        for (std::size_t s = 0; s < dim; ++s)
            for (int bit = 0; bit < n_; ++bit) contrib += column[s] * column[s ^ (1ull << bit)];
        sx += w[k] * contrib;
    }
    return sx / n_;
}

MultinomialCheck check_multinomial(const std::vector<long long>& counts, const std::vector<double>& probs) {
    MultinomialCheck check;
    check.bins = static_cast<int>(counts.size());
    long long total = 0;
    for (long long c : counts) total += c;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        const double expected = total * probs[i];
        const double sigma = std::sqrt(std::max(total * probs[i] * (1.0 - probs[i]), 1e-12));
        const double z = (counts[i] - expected) / sigma;
        check.max_abs_z = std::max(check.max_abs_z, std::abs(z));
        if (std::abs(z) > 3.0) ++check.exceeding_3sigma;
    }
    check.exceed_fraction = static_cast<double>(check.exceeding_3sigma) / check.bins;
    return check;
}

}  // namespace qice::oracle
