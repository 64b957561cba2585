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

#include "qice/observables.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <sstream>

#include "json.hpp"

namespace qice {

std::array<int, 4> vertex_type_counts(const SpinState& state, const IceLattice& lattice) {
    std::array<int, 4> counts{0, 0, 0, 0};
    CouplingSpec unit;
    for (int r = 0; r < lattice.rows(); ++r)
        for (int c = 0; c < lattice.cols(); ++c) {
            auto rep = vertex_report(state, lattice, r, c, unit);
            if (rep) ++counts[static_cast<std::size_t>(rep->type)];
        }
    return counts;
}

std::array<double, 4> vertex_frequencies(const SampleChain& chain, const IceLattice& lattice) {
    if (chain.size() <= chain.burn_in) throw ConfigError("chain has no post-burn-in states");
    std::array<double, 4> freq{0.0, 0.0, 0.0, 0.0};
    int n_states = 0;
    const double n_active = lattice.active_vertex_count();
    if (n_active == 0) throw ConfigError("lattice has no active vertices");
    for (int step = chain.burn_in; step < chain.size(); ++step) {
        auto counts = vertex_type_counts(chain.states[static_cast<std::size_t>(step)], lattice);
        for (int t = 0; t < 4; ++t) freq[static_cast<std::size_t>(t)] += counts[static_cast<std::size_t>(t)] / n_active;
        ++n_states;
    }
    for (auto& f : freq) f /= n_states;
    return freq;
}

double StructureFactorGrid::interpolate(double qx, double qy) const {
    const double fx = (qx - grid.qx_min) / (grid.qx_max - grid.qx_min) * grid.nx;
    const double fy = (qy - grid.qy_min) / (grid.qy_max - grid.qy_min) * grid.ny;
    int i0 = static_cast<int>(std::floor(fx));
    int j0 = static_cast<int>(std::floor(fy));
    i0 = std::clamp(i0, 0, grid.nx - 2);
    j0 = std::clamp(j0, 0, grid.ny - 2);
    const double tx = std::clamp(fx - i0, 0.0, 1.0);
    const double ty = std::clamp(fy - j0, 0.0, 1.0);
    const double v00 = at(i0, j0), v10 = at(i0 + 1, j0), v01 = at(i0, j0 + 1), v11 = at(i0 + 1, j0 + 1);
    return (1 - tx) * (1 - ty) * v00 + tx * (1 - ty) * v10 + (1 - tx) * ty * v01 + tx * ty * v11;
}

double StructureFactorGrid::nearest(double qx, double qy) const {
    int i = static_cast<int>(std::lround((qx - grid.qx_min) / (grid.qx_max - grid.qx_min) * grid.nx));
    int j = static_cast<int>(std::lround((qy - grid.qy_min) / (grid.qy_max - grid.qy_min) * grid.ny));
    i = std::clamp(i, 0, grid.nx - 1);
    j = std::clamp(j, 0, grid.ny - 1);
    return at(i, j);
}

namespace {

using Complex = std::complex<double>;

// Phase tables for the separable Fourier sums; sites sit on a
// half-integer grid, so the transform splits into per-row sums.
struct FourierWorkspace {
    const IceLattice& lattice;
    QGridSpec grid;
    // e^{i qx x} for horizontal-site columns (x = c - 0.5) and vertical
    // ones (x = c); e^{i qy y} likewise for rows.
    std::vector<Complex> hx, vx, hy, vy;
    std::vector<double> n_sites_h_row;  // scratch for per-row dipole sums
    std::vector<Complex> row_sum;

    FourierWorkspace(const IceLattice& lat, const QGridSpec& g) : lattice(lat), grid(g) {
        hx.resize(static_cast<std::size_t>(g.nx) * lattice.h_cols());
        vx.resize(static_cast<std::size_t>(g.nx) * lattice.cols());
        hy.resize(static_cast<std::size_t>(g.ny) * lattice.rows());
        vy.resize(static_cast<std::size_t>(g.ny) * lattice.v_rows());
        for (int i = 0; i < g.nx; ++i) {
            const double qx = g.qx(i);
            for (int c = 0; c < lattice.h_cols(); ++c)
                hx[static_cast<std::size_t>(i) * lattice.h_cols() + c] = std::polar(1.0, qx * (c - 0.5));
            for (int c = 0; c < lattice.cols(); ++c)
                vx[static_cast<std::size_t>(i) * lattice.cols() + c] = std::polar(1.0, qx * c);
        }
        for (int j = 0; j < g.ny; ++j) {
            const double qy = g.qy(j);
            for (int r = 0; r < lattice.rows(); ++r)
                hy[static_cast<std::size_t>(j) * lattice.rows() + r] = std::polar(1.0, qy * r);
            for (int r = 0; r < lattice.v_rows(); ++r)
                vy[static_cast<std::size_t>(j) * lattice.v_rows() + r] = std::polar(1.0, qy * (r - 0.5));
        }
        row_sum.resize(static_cast<std::size_t>(g.nx));
    }

    // Accumulates F_x and F_y of one state on the grid.
    void transform(const SpinState& state, std::vector<Complex>& fx, std::vector<Complex>& fy) {
        std::fill(fx.begin(), fx.end(), Complex{});
        std::fill(fy.begin(), fy.end(), Complex{});
        // Horizontal sites carry the x component of the dipole.
        for (int r = 0; r < lattice.rows(); ++r) {
            std::fill(row_sum.begin(), row_sum.end(), Complex{});
            bool any = false;
            for (int c = 0; c < lattice.h_cols(); ++c) {
                int site = lattice.h_site(r, c);
                if (lattice.vacant(site)) continue;
                double m = state.at(site) * lattice.orientation_sign(site);
                if (m == 0.0) continue;
                any = true;
                for (int i = 0; i < grid.nx; ++i)
                    row_sum[static_cast<std::size_t>(i)] += m * hx[static_cast<std::size_t>(i) * lattice.h_cols() + c];
            }
            if (!any) continue;
            for (int j = 0; j < grid.ny; ++j) {
                const Complex phase = hy[static_cast<std::size_t>(j) * lattice.rows() + r];
                Complex* out = fx.data() + static_cast<std::size_t>(j) * grid.nx;
                for (int i = 0; i < grid.nx; ++i) out[i] += phase * row_sum[static_cast<std::size_t>(i)];
            }
        }
        // Vertical sites carry the y component.
        for (int r = 0; r < lattice.v_rows(); ++r) {
            std::fill(row_sum.begin(), row_sum.end(), Complex{});
            bool any = false;
            for (int c = 0; c < lattice.cols(); ++c) {
                int site = lattice.v_site(r, c);
                if (lattice.vacant(site)) continue;
                double m = state.at(site) * lattice.orientation_sign(site);
                if (m == 0.0) continue;
                any = true;
                for (int i = 0; i < grid.nx; ++i)
                    row_sum[static_cast<std::size_t>(i)] += m * vx[static_cast<std::size_t>(i) * lattice.cols() + c];
            }
            if (!any) continue;
            for (int j = 0; j < grid.ny; ++j) {
                const Complex phase = vy[static_cast<std::size_t>(j) * lattice.v_rows() + r];
                Complex* out = fy.data() + static_cast<std::size_t>(j) * grid.nx;
                for (int i = 0; i < grid.nx; ++i) out[i] += phase * row_sum[static_cast<std::size_t>(i)];
            }
        }
    }
};

}  // namespace

StructureFactorGrid structure_factor(const std::vector<const SampleChain*>& chains, const IceLattice& lattice,
                                     const QGridSpec& grid) {
    int n_sites = 0;
    for (int s = 0; s < lattice.site_count(); ++s)
        if (!lattice.vacant(s)) ++n_sites;
    if (n_sites == 0) throw ConfigError("no spins to transform");

    const std::size_t n_q = static_cast<std::size_t>(grid.nx) * grid.ny;
    std::vector<double> sxx(n_q, 0.0), syy(n_q, 0.0), sxy(n_q, 0.0);
    std::vector<Complex> fx(n_q), fy(n_q);
    FourierWorkspace workspace(lattice, grid);

    int n_states = 0;
    for (const SampleChain* chain : chains) {
        for (int step = chain->burn_in; step < chain->size(); ++step) {
            workspace.transform(chain->states[static_cast<std::size_t>(step)], fx, fy);
            for (std::size_t k = 0; k < n_q; ++k) {
                sxx[k] += std::norm(fx[k]);
                syy[k] += std::norm(fy[k]);
                sxy[k] += fx[k].real() * fy[k].real() + fx[k].imag() * fy[k].imag();
            }
            ++n_states;
        }
    }
    if (n_states == 0) throw ConfigError("no post-burn-in states to transform");

    StructureFactorGrid out;
    out.grid = grid;
    out.values.assign(n_q, 0.0);
    const double norm = 1.0 / (static_cast<double>(n_sites) * n_states);
    for (int j = 0; j < grid.ny; ++j)
        for (int i = 0; i < grid.nx; ++i) {
            const std::size_t k = static_cast<std::size_t>(j) * grid.nx + i;
            const double qx = grid.qx(i), qy = grid.qy(j);
            const double q2 = qx * qx + qy * qy;
            double v;
            if (q2 == 0.0) {
                v = 0.5 * (sxx[k] + syy[k]);  // mean of the two on-axis limits
            } else {
                const double ux = qx * qx / q2, uy = qy * qy / q2, uxy = qx * qy / q2;
                v = (1.0 - ux) * sxx[k] + (1.0 - uy) * syy[k] - 2.0 * uxy * sxy[k];
            }
            out.values[k] = v * norm;
        }
    return out;
}

StructureFactorGrid structure_factor(const SampleChain& chain, const IceLattice& lattice, const QGridSpec& grid) {
    return structure_factor(std::vector<const SampleChain*>{&chain}, lattice, grid);
}

CrossSection pinch_cross_section(const StructureFactorGrid& grid, std::array<double, 2> point,
                                 std::array<double, 2> direction, double half_width) {
    const double len = std::hypot(direction[0], direction[1]);
    if (len == 0.0) throw ConfigError("cross-section direction must be nonzero");
    const double ux = direction[0] / len, uy = direction[1] / len;
    const double step = std::min((grid.grid.qx_max - grid.grid.qx_min) / grid.grid.nx,
                                 (grid.grid.qy_max - grid.grid.qy_min) / grid.grid.ny);
    const int half_n = std::max(2, static_cast<int>(std::floor(half_width / step)));

    CrossSection section;
    for (int k = -half_n; k <= half_n; ++k) {
        const double t = k * step;
        section.offset.push_back(t);
        section.value.push_back(grid.interpolate(point[0] + t * ux, point[1] + t * uy));
    }

    const auto peak_it = std::max_element(section.value.begin(), section.value.end());
    const std::size_t peak = static_cast<std::size_t>(peak_it - section.value.begin());
    const double floor_v = *std::min_element(section.value.begin(), section.value.end());
    const double height = *peak_it - floor_v;
    if (height <= 1e-12 || height < 0.05 * std::abs(*peak_it)) return section;  // no peak above background
    const double half = floor_v + 0.5 * height;

    auto cross_left = [&]() -> std::optional<double> {
        for (std::size_t i = peak; i-- > 0;) {
            if (section.value[i] <= half) {
                const double v0 = section.value[i], v1 = section.value[i + 1];
                const double frac = (half - v0) / (v1 - v0);
                return section.offset[i] + frac * (section.offset[i + 1] - section.offset[i]);
            }
        }
        return std::nullopt;
    };
    auto cross_right = [&]() -> std::optional<double> {
        for (std::size_t i = peak + 1; i < section.value.size(); ++i) {
            if (section.value[i] <= half) {
                const double v0 = section.value[i - 1], v1 = section.value[i];
                const double frac = (v0 - half) / (v0 - v1);
                return section.offset[i - 1] + frac * (section.offset[i] - section.offset[i - 1]);
            }
        }
        return std::nullopt;
    };

    auto left = cross_left();
    auto right = cross_right();
    if (left && right) {
        section.fwhm = *right - *left;
        if (*section.fwhm > 0.0) section.correlation_length = 1.0 / *section.fwhm;
    }
    return section;
}

namespace {

FrequencyMap reduce_maps(const std::vector<const SampleChain*>& chains, const IceLattice& lattice, bool signed_charge,
                         int pinned_vertex) {
    FrequencyMap map;
    map.rows = lattice.rows();
    map.cols = lattice.cols();
    map.pinned_vertex = pinned_vertex;
    map.value.assign(static_cast<std::size_t>(lattice.vertex_count()), 0.0);
    map.present.assign(static_cast<std::size_t>(lattice.vertex_count()), 0);
    for (int r = 0; r < lattice.rows(); ++r)
        for (int c = 0; c < lattice.cols(); ++c)
            map.present[static_cast<std::size_t>(lattice.vertex_index(r, c))] = lattice.vertex_active(r, c) ? 1 : 0;

    long long n_states = 0;
    for (const SampleChain* chain : chains) {
        for (int step = chain->burn_in; step < chain->size(); ++step) {
            ChargeMap charges = charge_map(chain->states[static_cast<std::size_t>(step)], lattice);
            for (std::size_t v = 0; v < charges.charge.size(); ++v) {
                if (!charges.active[v]) continue;
                if (signed_charge)
                    map.value[v] += charges.charge[v];
                else
                    map.value[v] += std::abs(charges.charge[v]) >= 2 ? 1.0 : 0.0;
            }
            ++n_states;
        }
    }
    if (n_states == 0) throw ConfigError("no post-burn-in states to reduce");
    for (auto& v : map.value) v /= static_cast<double>(n_states);
    return map;
}

}  // namespace

FrequencyMap monopole_map(const std::vector<const SampleChain*>& chains, const IceLattice& lattice,
                          int pinned_vertex) {
    return reduce_maps(chains, lattice, false, pinned_vertex);
}

FrequencyMap monopole_map(const std::vector<SampleChain>& chains, const IceLattice& lattice, int pinned_vertex) {
    std::vector<const SampleChain*> ptrs;
    for (const auto& c : chains) ptrs.push_back(&c);
    return monopole_map(ptrs, lattice, pinned_vertex);
}

FrequencyMap signed_charge_map(const std::vector<const SampleChain*>& chains, const IceLattice& lattice) {
    return reduce_maps(chains, lattice, true, -1);
}

BesselFit fit_bessel_k0(const std::vector<double>& x, const std::vector<double>& y) {
    BesselFit fit;
    if (x.size() != y.size() || x.size() < 3) return fit;
    const int n = static_cast<int>(x.size());

    auto solve_amplitude = [&](double xi, double& rss) {
        double num = 0.0, den = 0.0;
        for (int i = 0; i < n; ++i) {
            const double k = std::cyl_bessel_k(0.0, x[static_cast<std::size_t>(i)] / xi);
            num += y[static_cast<std::size_t>(i)] * k;
            den += k * k;
        }
        const double a = den > 0.0 ? num / den : 0.0;
        rss = 0.0;
        for (int i = 0; i < n; ++i) {
            const double k = std::cyl_bessel_k(0.0, x[static_cast<std::size_t>(i)] / xi);
            const double d = y[static_cast<std::size_t>(i)] - a * k;
            rss += d * d;
        }
        return a;
    };

    // Tail-slope initialization: ln|y| ~ -x/xi on the outer half.
    double xi0 = 0.0;
    {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        int m = 0;
        for (int i = n / 2; i < n; ++i) {
            if (y[static_cast<std::size_t>(i)] <= 0.0) continue;
            const double lx = x[static_cast<std::size_t>(i)], ly = std::log(y[static_cast<std::size_t>(i)]);
            sx += lx; sy += ly; sxx += lx * lx; sxy += lx * ly;
            ++m;
        }
        if (m >= 2) {
            const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
            if (slope < 0.0) xi0 = -1.0 / slope;
        }
    }
    const double span = x.back() - x.front();
    if (!(xi0 > 0.0) || !std::isfinite(xi0)) xi0 = 0.25 * std::max(span, x.back());

    const double lo = std::max(1e-3 * x.back(), xi0 / 64.0), hi = xi0 * 64.0;
    double best_xi = xi0, best_rss = 0.0, best_a = solve_amplitude(xi0, best_rss);
    const int scan = 97;
    for (int i = 0; i < scan; ++i) {
        const double xi = lo * std::pow(hi / lo, static_cast<double>(i) / (scan - 1));
        double rss;
        const double a = solve_amplitude(xi, rss);
        if (rss < best_rss) {
            best_rss = rss;
            best_xi = xi;
            best_a = a;
        }
    }
    // Golden-section refinement around the best scan point.
    {
        double a_lo = best_xi / 1.6, a_hi = best_xi * 1.6;
        const double phi = 0.6180339887498949;
        double x1 = a_hi - phi * (a_hi - a_lo), x2 = a_lo + phi * (a_hi - a_lo);
        double r1, r2;
        solve_amplitude(x1, r1);
        solve_amplitude(x2, r2);
        for (int it = 0; it < 60; ++it) {
            if (r1 < r2) {
                a_hi = x2; x2 = x1; r2 = r1;
                x1 = a_hi - phi * (a_hi - a_lo);
                solve_amplitude(x1, r1);
            } else {
                a_lo = x1; x1 = x2; r1 = r2;
                x2 = a_lo + phi * (a_hi - a_lo);
                solve_amplitude(x2, r2);
            }
        }
        const double xi = 0.5 * (a_lo + a_hi);
        double rss;
        const double a = solve_amplitude(xi, rss);
        if (rss <= best_rss) {
            best_rss = rss;
            best_xi = xi;
            best_a = a;
        }
    }

    fit.amplitude = best_a;
    fit.xi = best_xi;
    fit.rms_residual = std::sqrt(best_rss / n);
    fit.ok = std::isfinite(best_a) && std::isfinite(best_xi) && best_xi > 0.0;
    return fit;
}

ScreeningProfile screening_profile(const FrequencyMap& probe, const FrequencyMap& background, int pin_row,
                                   int pin_col) {
    if (probe.rows != background.rows || probe.cols != background.cols)
        throw ConfigError("screening maps must share dimensions");
    double mean_bg = 0.0;
    int n_bg = 0;
    for (int r = 0; r < background.rows; ++r)
        for (int c = 0; c < background.cols; ++c)
            if (background.has(r, c)) {
                mean_bg += background.at(r, c);
                ++n_bg;
            }
    if (n_bg == 0) throw ConfigError("background map is empty");
    mean_bg /= n_bg;
    if (mean_bg == 0.0) throw ConfigError("background map is identically zero; normalization undefined");

    std::map<int, ScreeningBin> bins;  // keyed by squared grid distance
    for (int r = 0; r < probe.rows; ++r)
        for (int c = 0; c < probe.cols; ++c) {
            if (!probe.has(r, c) || !background.has(r, c)) continue;
            if (r == pin_row && c == pin_col) continue;
            const int d2 = (r - pin_row) * (r - pin_row) + (c - pin_col) * (c - pin_col);
            const double diff = (probe.at(r, c) - background.at(r, c)) / mean_bg;
            auto [it, inserted] = bins.try_emplace(d2);
            ScreeningBin& bin = it->second;
            if (inserted) {
                bin.distance = std::sqrt(static_cast<double>(d2));
                bin.parity = d2 & 1;
                bin.min = bin.max = diff;
            } else {
                bin.min = std::min(bin.min, diff);
                bin.max = std::max(bin.max, diff);
            }
            bin.mean += diff;
            ++bin.count;
        }

    ScreeningProfile profile;
    for (auto& [d2, bin] : bins) {
        bin.mean /= bin.count;
        profile.bins.push_back(bin);
    }

    std::vector<double> xs, ys;
    for (const auto& bin : profile.bins)
        if (bin.count >= 3) {
            xs.push_back(bin.distance);
            ys.push_back(bin.mean);
        }
    BesselFit fit = fit_bessel_k0(xs, ys);
    profile.amplitude = fit.amplitude;
    profile.xi = fit.xi;
    profile.rms_residual = fit.rms_residual;
    profile.fit_ok = fit.ok;
    if (fit.ok && !ys.empty()) {
        double rms_y = 0.0;
        for (double y : ys) rms_y += y * y;
        rms_y = std::sqrt(rms_y / ys.size());
        profile.rel_residual = rms_y > 0.0 ? fit.rms_residual / rms_y : 0.0;
    }
    return profile;
}

int forced_monopole_count(BoundaryKind kind) {
    switch (kind) {
        case BoundaryKind::flux_injected: return 1;
        case BoundaryKind::pinned_monopole: return 2;
        default: return 0;
    }
}

MixingMetrics mixing_metrics(const SampleChain& chain, BoundaryKind kind) {
    if (chain.size() < 2) throw ConfigError("mixing metrics need a chain of at least two states");
    MixingMetrics metrics;
    const int forced = forced_monopole_count(kind);
    metrics.hamming = chain.hamming;
    for (int m : chain.monopoles) metrics.surplus.push_back(m - forced);
    return metrics;
}

BootstrapSummary bootstrap_mean(const std::vector<double>& values, int resamples, std::uint64_t seed) {
    BootstrapSummary summary;
    if (values.empty()) return summary;
    const int n = static_cast<int>(values.size());
    for (double v : values) summary.mean += v;
    summary.mean /= n;
    if (n == 1) {
        summary.lo = summary.hi = summary.mean;
        return summary;
    }
    Rng rng = make_rng(derive_seed(seed, {0xb007}));
    std::vector<double> means;
    means.reserve(static_cast<std::size_t>(resamples));
    for (int b = 0; b < resamples; ++b) {
        double m = 0.0;
        for (int i = 0; i < n; ++i) m += values[static_cast<std::size_t>(uniform_index(rng, n))];
        means.push_back(m / n);
    }
    std::sort(means.begin(), means.end());
    summary.lo = means[static_cast<std::size_t>(std::floor(0.025 * (resamples - 1)))];
    summary.hi = means[static_cast<std::size_t>(std::ceil(0.975 * (resamples - 1)))];
    return summary;
}

MixingAggregate aggregate_mixing(const std::vector<MixingMetrics>& reps, int burn_in, int resamples,
                                 std::uint64_t seed) {
    std::vector<double> hamming_means, surplus_means;
    for (const auto& rep : reps) {
        double h = 0.0, s = 0.0;
        int n = 0;
        const int start = std::max(burn_in, 1);  // step 0 has no predecessor
        for (std::size_t i = static_cast<std::size_t>(start); i < rep.hamming.size(); ++i) {
            h += rep.hamming[i];
            s += rep.surplus[i];
            ++n;
        }
        if (n == 0) continue;
        hamming_means.push_back(h / n);
        surplus_means.push_back(s / n);
    }
    MixingAggregate agg;
    agg.hamming = bootstrap_mean(hamming_means, resamples, derive_seed(seed, {1}));
    agg.surplus = bootstrap_mean(surplus_means, resamples, derive_seed(seed, {2}));
    return agg;
}

FrequencyMap symmetry_average(const FrequencyMap& map, int row0, int col0, int size) {
    if (size < 1 || row0 < 0 || col0 < 0 || row0 + size > map.rows || col0 + size > map.cols)
        throw ConfigError("subgrid out of range");
    for (int r = 0; r < size; ++r)
        for (int c = 0; c < size; ++c)
            if (!map.has(row0 + r, col0 + c)) throw ConfigError("subgrid must be vacancy-free");

    FrequencyMap out;
    out.rows = out.cols = size;
    out.value.assign(static_cast<std::size_t>(size) * size, 0.0);
    out.present.assign(static_cast<std::size_t>(size) * size, 1);
    for (int r = 0; r < size; ++r)
        for (int c = 0; c < size; ++c) {
            const int rr = size - 1 - r, cc = size - 1 - c;
            double sum = map.at(row0 + r, col0 + c) + map.at(row0 + rr, col0 + c) + map.at(row0 + r, col0 + cc) +
                         map.at(row0 + rr, col0 + cc) + map.at(row0 + c, col0 + r) + map.at(row0 + cc, col0 + r) +
                         map.at(row0 + c, col0 + rr) + map.at(row0 + cc, col0 + rr);
            out.value[static_cast<std::size_t>(r) * size + c] = sum / 8.0;
        }
    return out;
}

std::string screening_profile_to_csv(const ScreeningProfile& profile) {
    std::ostringstream out;
    out << "distance,mean,min,max,count,parity\n";
    out.precision(17);
    for (const auto& bin : profile.bins)
        out << bin.distance << ',' << bin.mean << ',' << bin.min << ',' << bin.max << ',' << bin.count << ','
            << bin.parity << '\n';
    return out.str();
}

std::string cross_section_to_csv(const CrossSection& section) {
    std::ostringstream out;
    out << "offset,value\n";
    out.precision(17);
    for (std::size_t i = 0; i < section.offset.size(); ++i)
        out << section.offset[i] << ',' << section.value[i] << '\n';
    return out.str();
}

std::string structure_factor_to_json(const StructureFactorGrid& grid) {
    nlohmann::json j;
    j["nx"] = grid.grid.nx;
    j["ny"] = grid.grid.ny;
    j["qx_min"] = grid.grid.qx_min;
    j["qx_max"] = grid.grid.qx_max;
    j["qy_min"] = grid.grid.qy_min;
    j["qy_max"] = grid.grid.qy_max;
    j["values"] = grid.values;
    return j.dump();
}

std::string frequency_map_to_json(const FrequencyMap& map) {
    nlohmann::json values = nlohmann::json::array();
    for (std::size_t i = 0; i < map.value.size(); ++i) {
        if (map.present[i])
            values.push_back(map.value[i]);
        else
            values.push_back(nullptr);
    }
    nlohmann::json j;
    j["rows"] = map.rows;
    j["cols"] = map.cols;
    j["pinned_vertex"] = map.pinned_vertex;
    j["values"] = std::move(values);
    return j.dump();
}

FrequencyMap frequency_map_from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    FrequencyMap map;
    map.rows = j.at("rows").get<int>();
    map.cols = j.at("cols").get<int>();
    map.pinned_vertex = j.value("pinned_vertex", -1);
    const auto& values = j.at("values");
    if (static_cast<int>(values.size()) != map.rows * map.cols) throw ConfigError("frequency map size mismatch");
    for (const auto& v : values) {
        if (v.is_null()) {
            map.value.push_back(0.0);
            map.present.push_back(0);
        } else {
            map.value.push_back(v.get<double>());
            map.present.push_back(1);
        }
    }
    return map;
}

}  // namespace qice
