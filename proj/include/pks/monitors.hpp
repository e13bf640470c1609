#pragma once

// Pure observers of the evolution: mass, zero/nonzero mode norms, the
// bootstrap quantities, the composite functional F, and two sanity ratios
// (Nash on the zero mode, heat-kernel bound on dy c_0). Nothing here feeds
// back into the dynamics.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "pks/errors.hpp"
#include "pks/grid.hpp"
#include "pks/hypocoercivity.hpp"
#include "pks/model.hpp"

namespace pks {

enum class BlowupFlag { none = 0, blowup = 1, aborted = 2 };

struct MonitorRecord {
    double t = 0.0;
    double dt = 0.0;
    double mass = 0.0;
    double n_linf = 0.0;
    double n0_l2 = 0.0;
    double n0_h1 = 0.0;  // ||dy n_0||_2
    double nneq_l2 = 0.0;
    double gradc_neq_l2 = 0.0;
    double gradc_neq_linf = 0.0;
    double dyc0_linf = 0.0;
    double F_total = 0.0;
    double F_n = 0.0;
    double F_dyc = 0.0;
    double F_dxc = 0.0;
    double F_Akc = 0.0;
    std::vector<double> phi_per_k;  // Phi_k[n], k = 1 .. k_report
    double h1_accumulator = 0.0;    // (1/A) int_0^t ||grad n_neq||_2^2 ds
    double nash_ratio = 0.0;
    double heat_kernel_ratio = 0.0;
    BlowupFlag blowup_flag = BlowupFlag::none;

    // Carried between records, not part of the CSV schema.
    double h1_rate = 0.0;        // (1/A) ||grad n_neq||_2^2 at t
    double sup_n0_lq = 0.0;      // sup over records of ||n_0||_q
    double dyc_in0_lp = 0.0;     // ||(dy c_in)_0||_p of the first record
    double n_linf_initial = 0.0;

    /// ||n_neq||^2 + ||grad c_neq||^2
    double h2_quantity() const { return nneq_l2 * nneq_l2 + gradc_neq_l2 * gradc_neq_l2; }
};

struct MonitorConfig {
    HypoEpsilons eps;
    int k_report = 4;
    double heat_p = 4.0;
    double heat_q = 2.0;
};

/// Returned by nash_ratio for a profile with vanishing L1 norm or gradient.
inline constexpr double kNashUndefined = -1.0;

inline double nash_ratio(std::span<const double> n0, const Grid& g) {
    if (n0.size() != static_cast<std::size_t>(g.ny())) throw DimensionError("nash_ratio: profile length mismatch");
    const auto w = g.weights();
    const double l1 = lp_norm_profile(n0, w, 1.0);
    const double l2 = lp_norm_profile(n0, w, 2.0);
    const auto d = ddy_profile_first(n0, g.dy());
    const double dl2 = lp_norm_profile(d, w, 2.0);
    if (!(l1 > 0.0) || !(dl2 > 0.0)) return kNashUndefined;
    return l2 / (std::pow(l1, 2.0 / 3.0) * std::cbrt(dl2));
}

/// Zero-mode snapshot used by the heat-kernel ratio.
struct ZeroModeSnapshot {
    std::vector<double> n0;
    std::vector<double> dyc0;
};

inline double heat_kernel_ratio_value(double numerator, double sup_n0, double initial) {
    const double den = sup_n0 + initial;
    if (numerator == 0.0) return 0.0;
    if (!(den > 0.0)) return std::numeric_limits<double>::infinity();
    return numerator / den;
}

/// ||dy c_0(t)||_p / (sup_tau ||n_0(tau)||_q + ||(dy c_in)_0||_p), t = last
/// snapshot, c_in = first snapshot.
inline double heat_kernel_ratio(std::span<const ZeroModeSnapshot> history, const Grid& g, double p = 4.0,
                                double q = 2.0) {
    if (history.empty()) throw InsufficientDataError("heat_kernel_ratio: empty history");
    const auto w = g.weights();
    double sup = 0.0;
    for (const auto& s : history) sup = std::max(sup, lp_norm_profile(s.n0, w, q));
    const double init = lp_norm_profile(history.front().dyc0, w, p);
    const double num = lp_norm_profile(history.back().dyc0, w, p);
    return heat_kernel_ratio_value(num, sup, init);
}

struct BlowupCriteria {
    double factor = 1e3;
    double dt_min = 0.0;
    double initial_n_linf = 0.0;
};

inline bool blowup_check(const MonitorRecord& r, const BlowupCriteria& c) {
    if (r.blowup_flag == BlowupFlag::aborted) return true;
    if (!std::isfinite(r.n_linf) || !std::isfinite(r.mass) || !std::isfinite(r.dt)) return true;
    if (r.n_linf >= c.factor * c.initial_n_linf) return true;
    return r.dt <= c.dt_min;
}

inline MonitorRecord aborted_record(double t, double dt) {
    MonitorRecord r;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    r.t = t;
    r.dt = dt;
    r.mass = r.n_linf = r.n0_l2 = r.n0_h1 = r.nneq_l2 = r.gradc_neq_l2 = r.gradc_neq_linf = r.dyc0_linf = nan;
    r.F_total = r.F_n = r.F_dyc = r.F_dxc = r.F_Akc = nan;
    r.h1_accumulator = r.nash_ratio = r.heat_kernel_ratio = nan;
    r.blowup_flag = BlowupFlag::aborted;
    return r;
}

/// Builds the record for snapshot (n, c) at time t. `prev` is the previous
/// record of the same run, or empty for the first one.
inline MonitorRecord update_monitors(double t, double dt, const Field& n, const SpectralField& n_hat,
                                     const SpectralField& c_hat, const ShearProfile& shear, const ModelParams& params,
                                     const MonitorConfig& cfg, const MonitorRecord* prev) {
    if (!n.all_finite()) return aborted_record(t, dt);
    for (const auto& v : c_hat.data()) {
        if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return aborted_record(t, dt);
    }
    const Grid& g = n.grid();
    const auto w = g.weights();
    const auto ny = static_cast<std::size_t>(g.ny());
    MonitorRecord r;
    r.t = t;
    r.dt = dt;
    r.mass = integrate(n);
    r.n_linf = lp_norm(n, INFINITY);

    std::vector<double> n0(ny), c0(ny);
    for (std::size_t j = 0; j < ny; ++j) {
        n0[j] = n_hat.profile(0)[j].real();
        c0[j] = c_hat.profile(0)[j].real();
    }
    const auto dyn0 = ddy_profile_first<double>(n0, g.dy());
    const auto dyc0 = ddy_profile_first<double>(c0, g.dy());
    r.n0_l2 = lp_norm_profile(n0, w, 2.0);
    r.n0_h1 = lp_norm_profile(dyn0, w, 2.0);
    r.dyc0_linf = lp_norm_profile(dyc0, w, INFINITY);

    double nneq_sq = 0.0, gradc_sq = 0.0, gradn_sq = 0.0;
    SpectralField cx_hat(g), cy_hat(g);
    for (int k = 1; k < g.nk(); ++k) {
        const double pw = parseval_weight(g, k);
        const double ka = derivative_wavenumber(g, k);
        const auto nk = n_hat.profile(k);
        const auto ck = c_hat.profile(k);
        const auto dnk = ddy_profile_first(nk, g.dy());
        const auto dck = ddy_profile_first(ck, g.dy());
        const double nsq = norm2_sq_profile(nk, w);
        const double csq = norm2_sq_profile(ck, w);
        nneq_sq += pw * nsq;
        gradn_sq += pw * (ka * ka * nsq + norm2_sq_profile<Complex>(dnk, w));
        gradc_sq += pw * (ka * ka * csq + norm2_sq_profile<Complex>(dck, w));
        auto cx = cx_hat.profile(k);
        auto cy = cy_hat.profile(k);
        for (std::size_t j = 0; j < ny; ++j) {
            cx[j] = Complex(0.0, ka) * ck[j];
            cy[j] = dck[j];
        }
    }
    r.nneq_l2 = std::sqrt(nneq_sq);
    r.gradc_neq_l2 = std::sqrt(gradc_sq);
    {
        const Field cx = to_physical(cx_hat);
        const Field cy = to_physical(cy_hat);
        double m = 0.0;
        for (std::size_t idx = 0; idx < g.size(); ++idx) {
            m = std::max(m, std::hypot(cx.values()[idx], cy.values()[idx]));
        }
        r.gradc_neq_linf = m;
    }

    const FunctionalF F = functional_F(n_hat, c_hat, shear, params.A, cfg.eps);
    r.F_total = F.total;
    r.F_n = F.n;
    r.F_dyc = F.dyc;
    r.F_dxc = F.dxc;
    r.F_Akc = F.akc;
    const auto kr = static_cast<std::size_t>(std::clamp(cfg.k_report, 0, g.nyquist()));
    r.phi_per_k.assign(F.phi_n_per_k.begin(), F.phi_n_per_k.begin() + static_cast<std::ptrdiff_t>(kr));
    r.phi_per_k.resize(static_cast<std::size_t>(std::max(cfg.k_report, 0)), 0.0);

    r.h1_rate = gradn_sq / params.A;
    r.nash_ratio = nash_ratio(n0, g);

    const double n0_lq = lp_norm_profile(n0, w, cfg.heat_q);
    const double dyc0_lp = lp_norm_profile(dyc0, w, cfg.heat_p);
    if (prev != nullptr) {
        r.h1_accumulator = prev->h1_accumulator + 0.5 * (t - prev->t) * (prev->h1_rate + r.h1_rate);
        r.sup_n0_lq = std::max(prev->sup_n0_lq, n0_lq);
        r.dyc_in0_lp = prev->dyc_in0_lp;
        r.n_linf_initial = prev->n_linf_initial;
    } else {
        r.sup_n0_lq = n0_lq;
        r.dyc_in0_lp = dyc0_lp;
        r.n_linf_initial = r.n_linf;
    }
    r.heat_kernel_ratio = heat_kernel_ratio_value(dyc0_lp, r.sup_n0_lq, r.dyc_in0_lp);
    return r;
}

inline MonitorRecord update_monitors(const PKSState& state, const ShearProfile& shear, const ModelParams& params,
                                     const MonitorConfig& cfg, const MonitorRecord* prev, double dt = 0.0) {
    if (!state.n.all_finite() || !state.c.all_finite()) return aborted_record(state.t, dt);
    return update_monitors(state.t, dt, state.n, to_spectral(state.n), to_spectral(state.c), shear, params, cfg,
                           prev);
}

}  // namespace pks
