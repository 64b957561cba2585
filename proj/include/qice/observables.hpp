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
#include <optional>
#include <string>
#include <vector>

#include "qice/lattice.hpp"
#include "qice/sampler.hpp"

namespace qice {

/// Fraction of active vertices of each type, averaged over the
/// post-burn-in states of a chain.
std::array<double, 4> vertex_frequencies(const SampleChain& chain, const IceLattice& lattice);

std::array<int, 4> vertex_type_counts(const SpinState& state, const IceLattice& lattice);

/// Reciprocal-space sample grid, endpoint-exclusive so the periodic
/// image at +2pi is not double counted.
struct QGridSpec {
    int nx = 128;
    int ny = 128;
    double qx_min = -6.283185307179586, qx_max = 6.283185307179586;
    double qy_min = -6.283185307179586, qy_max = 6.283185307179586;

    double qx(int i) const { return qx_min + (qx_max - qx_min) * i / nx; }
    double qy(int j) const { return qy_min + (qy_max - qy_min) * j / ny; }
};

struct StructureFactorGrid {
    QGridSpec grid;
    std::vector<double> values;  // row-major, [j*nx + i]

    double at(int i, int j) const { return values[static_cast<std::size_t>(j) * grid.nx + i]; }
    /// Bilinear interpolation inside the grid span.
    double interpolate(double qx, double qy) const;
    /// Value at the grid point nearest to (qx, qy).
    double nearest(double qx, double qy) const;
};

/// Vector-based magnetic structure factor
///   S(q) = (1/N) |sum_i m_perp,i exp(iq.r_i)|^2
/// averaged over post-burn-in states; m_i is the planar dipole of spin i
/// and m_perp its component transverse to q.  Vacant sites are excluded
/// from the sum and from N.  The q=0 projector singularity is reported
/// as the mean of the two on-axis limits.
StructureFactorGrid structure_factor(const SampleChain& chain, const IceLattice& lattice, const QGridSpec& grid);
StructureFactorGrid structure_factor(const std::vector<const SampleChain*>& chains, const IceLattice& lattice,
                                     const QGridSpec& grid);

struct CrossSection {
    std::vector<double> offset;  // signed distance from the pinch point
    std::vector<double> value;
    std::optional<double> fwhm;  // undefined when no peak rises above background
    std::optional<double> correlation_length;  // 1 / fwhm
};

/// 1D cut of S(q) through `point` along `direction`, sampled at the
/// grid spacing; FWHM by linear interpolation between the bracketing
/// samples on each side of the peak.
CrossSection pinch_cross_section(const StructureFactorGrid& grid, std::array<double, 2> point,
                                 std::array<double, 2> direction, double half_width);

/// Per-vertex frequency grid; absent entries mark inactive vertices.
struct FrequencyMap {
    int rows = 0, cols = 0;
    std::vector<double> value;
    std::vector<std::uint8_t> present;
    int pinned_vertex = -1;

    double at(int r, int c) const { return value[static_cast<std::size_t>(r) * cols + c]; }
    bool has(int r, int c) const { return present[static_cast<std::size_t>(r) * cols + c] != 0; }
};

/// Fraction of post-burn-in samples in which each active vertex holds a
/// monopole (|Q| >= 2).
FrequencyMap monopole_map(const std::vector<const SampleChain*>& chains, const IceLattice& lattice,
                          int pinned_vertex = -1);
FrequencyMap monopole_map(const std::vector<SampleChain>& chains, const IceLattice& lattice, int pinned_vertex = -1);

/// Mean signed charge per vertex; sums to the boundary-forced net charge.
FrequencyMap signed_charge_map(const std::vector<const SampleChain*>& chains, const IceLattice& lattice);

struct ScreeningBin {
    double distance = 0.0;
    double mean = 0.0, min = 0.0, max = 0.0;
    int count = 0;
    int parity = 0;  // parity of the grid (l1) distance, fixed per Euclidean bin
};

struct ScreeningProfile {
    std::vector<ScreeningBin> bins;  // ordered by distance, pinned vertex excluded
    double amplitude = 0.0;
    double xi = 0.0;
    double rms_residual = 0.0;
    double rel_residual = 0.0;  // rms residual over rms of the bin means
    bool fit_ok = false;
};

struct BesselFit {
    double amplitude = 0.0;
    double xi = 0.0;
    double rms_residual = 0.0;
    bool ok = false;
};

/// Least-squares fit of amplitude * K0(x/xi), initialized from the
/// exponential tail slope.
BesselFit fit_bessel_k0(const std::vector<double>& x, const std::vector<double>& y);

/// Normalized monopole-frequency difference (probe - background) /
/// mean(background), binned by exact Euclidean distance from the pinned
/// vertex; bins with fewer than 3 vertices are excluded from the fit.
ScreeningProfile screening_profile(const FrequencyMap& probe, const FrequencyMap& background, int pin_row,
                                   int pin_col);

/// Per-step sample-to-sample difference and surplus monopole count
/// (excess over what the boundary condition forces).
struct MixingMetrics {
    std::vector<int> hamming;
    std::vector<int> surplus;
};

int forced_monopole_count(BoundaryKind kind);
MixingMetrics mixing_metrics(const SampleChain& chain, BoundaryKind kind);

struct BootstrapSummary {
    double mean = 0.0;
    double lo = 0.0, hi = 0.0;  // 95% percentile interval
};

BootstrapSummary bootstrap_mean(const std::vector<double>& values, int resamples, std::uint64_t seed);

struct MixingAggregate {
    BootstrapSummary hamming;
    BootstrapSummary surplus;
};

/// Aggregates per-repetition means (post-burn-in) with bootstrap CIs.
MixingAggregate aggregate_mixing(const std::vector<MixingMetrics>& reps, int burn_in, int resamples,
                                 std::uint64_t seed);

/// Average of a vacancy-free square subgrid over the 8 point-group
/// symmetries of the square.
FrequencyMap symmetry_average(const FrequencyMap& map, int row0, int col0, int size);

// Plot-ready emission: CSV for 1D profiles, JSON for grids.
std::string screening_profile_to_csv(const ScreeningProfile& profile);
std::string cross_section_to_csv(const CrossSection& section);
std::string structure_factor_to_json(const StructureFactorGrid& grid);
std::string frequency_map_to_json(const FrequencyMap& map);
FrequencyMap frequency_map_from_json(const std::string& text);

}  // namespace qice
