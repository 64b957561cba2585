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

#include <cmath>
#include <utility>
#include <vector>

#include "qice/lattice.hpp"
#include "qice/rng.hpp"

namespace qice {

/// Generic Ising model on an arbitrary graph, used for sampling embedded
/// (Chimera-level) problems.  E = sum_bonds J s_a s_b + sum_i h_i s_i.
class GraphIsingModel {
  public:
    explicit GraphIsingModel(int n)
        : n_(n), field_(static_cast<std::size_t>(n), 0.0), frozen_(static_cast<std::size_t>(n), 0) {}

    int size() const { return n_; }
    void add_bond(int a, int b, double j) { bonds_.push_back({a, b, j}); }
    void set_field(int i, double h) { field_[static_cast<std::size_t>(i)] = h; }
    void add_field(int i, double h) { field_[static_cast<std::size_t>(i)] += h; }
    void set_frozen(int i) { frozen_[static_cast<std::size_t>(i)] = 1; }
    bool frozen(int i) const { return frozen_[static_cast<std::size_t>(i)] != 0; }

    void finalize() {
        std::vector<int> degree(static_cast<std::size_t>(n_), 0);
        for (const auto& b : bonds_) {
            ++degree[static_cast<std::size_t>(b.a)];
            ++degree[static_cast<std::size_t>(b.b)];
        }
        offsets_.assign(static_cast<std::size_t>(n_) + 1, 0);
        for (int i = 0; i < n_; ++i) offsets_[static_cast<std::size_t>(i) + 1] = offsets_[static_cast<std::size_t>(i)] + degree[static_cast<std::size_t>(i)];
        partner_.resize(static_cast<std::size_t>(offsets_.back()));
        strength_.resize(static_cast<std::size_t>(offsets_.back()));
        std::vector<int> cursor(offsets_.begin(), offsets_.end() - 1);
        for (const auto& b : bonds_) {
            partner_[static_cast<std::size_t>(cursor[static_cast<std::size_t>(b.a)])] = b.b;
            strength_[static_cast<std::size_t>(cursor[static_cast<std::size_t>(b.a)]++)] = b.j;
            partner_[static_cast<std::size_t>(cursor[static_cast<std::size_t>(b.b)])] = b.a;
            strength_[static_cast<std::size_t>(cursor[static_cast<std::size_t>(b.b)]++)] = b.j;
        }
        free_.clear();
        for (int i = 0; i < n_; ++i)
            if (!frozen_[static_cast<std::size_t>(i)]) free_.push_back(i);
    }

    double energy(const std::vector<Spin>& s) const {
        double e = 0.0;
        for (const auto& b : bonds_) e += b.j * s[static_cast<std::size_t>(b.a)] * s[static_cast<std::size_t>(b.b)];
        for (int i = 0; i < n_; ++i) e += field_[static_cast<std::size_t>(i)] * s[static_cast<std::size_t>(i)];
        return e;
    }

    double flip_delta(const std::vector<Spin>& s, int i) const {
        double local = field_[static_cast<std::size_t>(i)];
        for (int k = offsets_[static_cast<std::size_t>(i)]; k < offsets_[static_cast<std::size_t>(i) + 1]; ++k)
            local += strength_[static_cast<std::size_t>(k)] * s[static_cast<std::size_t>(partner_[static_cast<std::size_t>(k)])];
        return -2.0 * s[static_cast<std::size_t>(i)] * local;
    }

    void metropolis_sweep(std::vector<Spin>& s, double temperature, Rng& rng) const {
        const int n_free = static_cast<int>(free_.size());
        if (n_free == 0) return;
        const double inv_t = 1.0 / temperature;
        for (int k = 0; k < n_free; ++k) {
            int i = free_[static_cast<std::size_t>(uniform_index(rng, n_free))];
            double delta = flip_delta(s, i);
            if (delta <= 0.0 || uniform_real(rng) < std::exp(-delta * inv_t))
                s[static_cast<std::size_t>(i)] = static_cast<Spin>(-s[static_cast<std::size_t>(i)]);
        }
    }

  private:
    struct Bond {
        int a, b;
        double j;
    };

    int n_;
    std::vector<Bond> bonds_;
    std::vector<double> field_;
    std::vector<std::uint8_t> frozen_;
    std::vector<int> free_;
    std::vector<int> offsets_;
    std::vector<int> partner_;
    std::vector<double> strength_;
};

}  // namespace qice
