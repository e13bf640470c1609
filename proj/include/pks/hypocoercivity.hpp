#pragma once

// Hypocoercivity functionals for the sheared problem.
//
//   Phi_k[f] = ||f_k||^2 + alpha ||dy f_k||^2 + 2 k beta Re<i u' f_k, dy f_k> + k^2 gamma ||u' f_k||^2
//
// with alpha = e_a A^{-2/3} |k|^{-2/3}, beta = e_b A^{-1/3} |k|^{-4/3}, gamma = e_g |k|^{-2}.
// Norms of a single slice are over y only (trapezoid). The composite functional
// sums over k != 0 with the Parseval factor 2 pi, so that it bounds the
// physical norms  ||n_neq||^2 + ||grad c_neq||^2  on T x [-Ly, Ly].

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

#include "pks/errors.hpp"
#include "pks/grid.hpp"
#include "pks/model.hpp"

namespace pks {

struct HypoEpsilons {
    double alpha = 0.01;
    double beta = 0.003;
    double gamma = 0.01;

    void validate() const {
        if (!(alpha > 0.0 && beta > 0.0 && gamma > 0.0)) {
            throw ConfigError("hypocoercivity epsilons must be positive");
        }
        if (!(8.0 * beta * beta <= alpha * gamma)) {
            throw ConfigError("hypocoercivity epsilons violate 8 eps_beta^2 <= eps_alpha eps_gamma");
        }
    }
};

struct Multipliers {
    double alpha = 0.0;
    double beta = 0.0;
    double gamma = 0.0;
};

inline Multipliers multipliers(double A, int k, const HypoEpsilons& eps) {
    eps.validate();
    if (k == 0) throw DomainError("multipliers are undefined for k = 0");
    if (!(A > 0.0)) throw DomainError("multipliers need A > 0");
    const double ak = std::abs(static_cast<double>(k));
    Multipliers m{eps.alpha * std::pow(A, -2.0 / 3.0) * std::pow(ak, -2.0 / 3.0),
                  eps.beta * std::pow(A, -1.0 / 3.0) * std::pow(ak, -4.0 / 3.0), eps.gamma / (ak * ak)};
    if (!(8.0 * m.beta * m.beta <= m.alpha * m.gamma * (1.0 + 1e-12))) {
        throw InternalError("multipliers violate 8 beta^2 <= alpha gamma");
    }
    return m;
}

/// The four terms of Phi_k, reported separately for diagnostics.
struct PhiTerms {
    double mass = 0.0;      // ||f||^2
    double gradient = 0.0;  // alpha ||dy f||^2
    double cross = 0.0;     // 2 k beta Re<i u' f, dy f>
    double shear = 0.0;     // k^2 gamma ||u' f||^2

    double total() const { return mass + gradient + cross + shear; }
    /// The cross-free comparison quantity Phi_k is equivalent to.
    double equivalent() const { return mass + gradient + shear; }
};

inline PhiTerms phi_k_terms(std::span<const Complex> f, int k, std::span<const double> u1, const Multipliers& m,
                            const Grid& g) {
    if (k == 0) throw DomainError("Phi_k is undefined for k = 0");
    if (f.size() != static_cast<std::size_t>(g.ny()) || u1.size() != f.size()) {
        throw DimensionError("phi_k: profile length does not match grid");
    }
    const auto fy = ddy_profile_first(f, g.dy());
    const auto w = g.weights();
    PhiTerms t;
    double cross = 0.0;
    double sheared = 0.0;
    for (std::size_t j = 0; j < f.size(); ++j) {
        const Complex uf = u1[j] * f[j];
        t.mass += w[j] * std::norm(f[j]);
        t.gradient += w[j] * std::norm(fy[j]);
        // Re( i u' f conj(fy) )
        cross += w[j] * (Complex(0.0, 1.0) * uf * std::conj(fy[j])).real();
        sheared += w[j] * std::norm(uf);
    }
    t.gradient *= m.alpha;
    t.cross = 2.0 * k * m.beta * cross;
    t.shear = static_cast<double>(k) * k * m.gamma * sheared;
    return t;
}

inline double phi_k(const SpectralSlice& slice, const ShearProfile& shear, const Multipliers& m, const Grid& g) {
    return phi_k_terms(slice.profile, slice.k, shear.u1, m, g).total();
}

struct FunctionalF {
    double total = 0.0;
    double n = 0.0;    // sum Phi_k[n_neq]
    double dyc = 0.0;  // sum Phi_k[dy c_neq]
    double dxc = 0.0;  // sum Phi_k[dx c_neq]
    double akc = 0.0;  // sum A |k| Phi_k[c_neq]
    std::vector<double> per_k;       // F_k for k = 1 .. nx/2, including the -k partner
    std::vector<double> phi_n_per_k; // Phi_k[n] of the single slice k = 1 .. nx/2
};

/// Parseval multiplicity of the half-spectrum slot k for sums over k != 0.
inline double parseval_weight(const Grid& g, int k) {
    return 2.0 * std::numbers::pi * (k == g.nyquist() ? 1.0 : 2.0);
}

inline FunctionalF functional_F(const SpectralField& n_hat, const SpectralField& c_hat, const ShearProfile& shear,
                                double A, const HypoEpsilons& eps) {
    const Grid& g = n_hat.grid();
    require_same_grid(g, c_hat.grid(), "functional_F");
    FunctionalF out;
    out.per_k.assign(static_cast<std::size_t>(g.nyquist()), 0.0);
    out.phi_n_per_k.assign(static_cast<std::size_t>(g.nyquist()), 0.0);
    std::vector<Complex> dxc(static_cast<std::size_t>(g.ny()));
    for (int k = 1; k < g.nk(); ++k) {
        const Multipliers m = multipliers(A, k, eps);
        const double pw = parseval_weight(g, k);
        const auto ck = c_hat.profile(k);
        const auto dyc = ddy_profile_first(ck, g.dy());
        const Complex ik(0.0, static_cast<double>(derivative_wavenumber(g, k)));
        for (std::size_t j = 0; j < dxc.size(); ++j) dxc[j] = ik * ck[j];

        const double pn = phi_k_terms(n_hat.profile(k), k, shear.u1, m, g).total();
        const double pdy = phi_k_terms(dyc, k, shear.u1, m, g).total();
        const double pdx = phi_k_terms(dxc, k, shear.u1, m, g).total();
        const double pc = A * k * phi_k_terms(ck, k, shear.u1, m, g).total();
        out.n += pw * pn;
        out.dyc += pw * pdy;
        out.dxc += pw * pdx;
        out.akc += pw * pc;
        out.per_k[static_cast<std::size_t>(k - 1)] = pw * (pn + pdy + pdx + pc);
        out.phi_n_per_k[static_cast<std::size_t>(k - 1)] = pn;
    }
    out.total = out.n + out.dyc + out.dxc + out.akc;
    return out;
}

inline FunctionalF functional_F(const PKSState& s, const ShearProfile& shear, const ModelParams& params,
                                const HypoEpsilons& eps) {
    require_finite(s.n, "functional_F");
    require_finite(s.c, "functional_F");
    return functional_F(to_spectral(s.n), to_spectral(s.c), shear, params.A, eps);
}

// ---------------------------------------------------------------------------
// Rate fitting

struct DecayFit {
    double rate = 0.0;  // lambda in value ~ exp(-lambda t)
    double t_lo = 0.0;
    double t_hi = 0.0;
    double r_squared = 0.0;
    std::size_t samples = 0;
};

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 1.0;
};

/// Ordinary least squares; r^2 = 1 for a series with no spread.
inline LineFit least_squares(std::span<const double> xs, std::span<const double> ys) {
    const std::size_t n = xs.size();
    const double x0 = xs[0];
    const double y0 = ys[0];
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += xs[i] - x0;
        my += ys[i] - y0;
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = xs[i] - x0 - mx;
        const double dy = ys[i] - y0 - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    LineFit f;
    f.slope = sxx > 0.0 ? sxy / sxx : 0.0;
    f.intercept = y0 + my - f.slope * (x0 + mx);
    if (syy > 0.0) {
        double ss_res = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double r = ys[i] - (f.intercept + f.slope * xs[i]);
            ss_res += r * r;
        }
        f.r_squared = std::max(0.0, 1.0 - ss_res / syy);
    }
    return f;
}

inline constexpr std::size_t kMinFitSamples = 10;

inline DecayFit fit_decay_rate(std::span<const double> t, std::span<const double> value,
                               std::pair<double, double> window) {
    if (t.size() != value.size()) throw DimensionError("fit_decay_rate: t and value lengths differ");
    if (!(window.first < window.second)) throw DomainError("fit_decay_rate: window needs t_lo < t_hi");
    std::vector<double> ts, logs;
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (t[i] < window.first || t[i] > window.second) continue;
        if (!(value[i] > 0.0)) {
            throw DomainError("fit_decay_rate: nonpositive value at t = " + std::to_string(t[i]));
        }
        ts.push_back(t[i]);
        logs.push_back(std::log(value[i]));
    }
    if (ts.size() < kMinFitSamples) {
        throw InsufficientDataError("fit_decay_rate: " + std::to_string(ts.size()) +
                                    " samples in window, need at least 10");
    }
    const LineFit lf = least_squares(ts, logs);
    return {-lf.slope, window.first, window.second, lf.r_squared, ts.size()};
}

/// Slope of log(lambda) against log(A).
inline double scaling_slope(std::span<const std::pair<double, double>> rates) {
    std::vector<double> la, ll;
    for (const auto& [A, lambda] : rates) {
        if (!(A > 0.0) || !(lambda > 0.0)) throw DomainError("scaling_slope needs positive A and rates");
        la.push_back(std::log(A));
        ll.push_back(std::log(lambda));
    }
    std::vector<double> distinct = la;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (distinct.size() < 3) throw InsufficientDataError("scaling_slope needs at least 3 distinct A values");
    return least_squares(la, ll).slope;
}

}  // namespace pks
