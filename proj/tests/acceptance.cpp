// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Usage: pks_acceptance [output-directory]
// With an output directory the suppression, no-flow and passive-scalar runs are
// written there as CSV plus metadata.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "pks/harness.hpp"

using namespace pks;

namespace {

int failures = 0;

void report(int id, bool pass, const std::string& detail) {
    std::printf("criterion %d: %s  %s\n", id, pass ? "PASS" : "FAIL", detail.c_str());
    std::fflush(stdout);
    if (!pass) ++failures;
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof(buf), f, args...);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Overrides with_output(Overrides ov, const std::string& root, const char* name) {
    if (!root.empty()) ov.emplace_back("output.directory", Json(root + "/" + name).dump());
    return ov;
}

// Largest defined Nash ratio over a run (the sentinel for vanishing n_0 is skipped).
double max_nash(const std::vector<MonitorRecord>& recs) {
    double m = -INFINITY;
    for (const auto& r : recs) {
        if (r.nash_ratio != kNashUndefined && std::isfinite(r.nash_ratio)) m = std::max(m, r.nash_ratio);
    }
    return m;
}

// --- criterion 6 pieces ----------------------------------------------------

double zero_mode_discrepancy() {
    const Grid g(16, 129, 8.0);
    const auto shear = build_shear(ShearKind::couette, {}, g);
    const double A = 1.0;
    auto n0 = [](double y) { return 0.5 + 3.0 * std::exp(-y * y); };
    auto c0 = [](double y) { return 0.2 * std::exp(-0.25 * y * y); };
    ImexStepper st({0.0, Field::from_function(g, [&](double, double y) { return n0(y); }),
                    Field::from_function(g, [&](double, double y) { return c0(y); })},
                   shear, {A, 1, std::nullopt}, RunMode::pks);
    oracle::Vec nv(g.ny()), cv(g.ny());
    for (int j = 0; j < g.ny(); ++j) {
        nv(j) = n0(g.y(j));
        cv(j) = c0(g.y(j));
    }
    oracle::ZeroModeSolver ref(nv, cv, A, g.dy());
    for (int i = 0; i < 400; ++i) {
        const double h = i % 2 == 0 ? 0.005 : 0.0035;
        st.advance(h);
        ref.step(h);
    }
    const PKSState s = st.state();
    double num = 0.0, den = 0.0;
    for (int j = 0; j < g.ny(); ++j) {
        for (int i = 0; i < g.nx(); ++i) {
            num += std::pow(s.n(i, j) - ref.n()(j), 2) + std::pow(s.c(i, j) - ref.c()(j), 2);
            den += std::pow(ref.n()(j), 2) + std::pow(ref.c()(j), 2);
        }
    }
    return std::sqrt(num / den);
}

std::pair<double, double> helmholtz_orders() {
    auto err = [](int ny) {
        const Grid g(16, ny, 6.0);
        const Field n = Field::from_function(
            g, [](double x, double y) { return std::cos(x) * std::exp(-y * y) * (4.0 - 4.0 * y * y); });
        const Field c = chem_elliptic_solve(n);
        double e = 0.0;
        for (int i = 0; i < g.nx(); ++i) {
            for (int j = 0; j < g.ny(); ++j) {
                e = std::max(e, std::abs(c(i, j) - std::cos(g.x(i)) * std::exp(-g.y(j) * g.y(j))));
            }
        }
        return e;
    };
    const double e1 = err(65), e2 = err(129), e3 = err(257);
    return {std::log2(e1 / e2), std::log2(e2 / e3)};
}

double phi_oracle_worst() {
    const Grid g(16, 257, 8.0);
    const auto shear = build_shear(ShearKind::tanh_perturbed, {0.5, {}, 1e3}, g);
    const oracle::Vec u1 = Eigen::Map<const oracle::Vec>(shear.u1.data(), g.ny());
    const oracle::Vec w = oracle::trapezoid_weights(g.ny(), g.Ly());
    std::mt19937_64 rng(2024);
    double worst = 0.0;
    for (int s = 0; s < 20; ++s) {
        const int k = 1 + s % 8;
        const Multipliers m = multipliers(std::pow(10.0, 2 + s % 3), k, {});
        const oracle::CVec f = oracle::random_profile(g.ny(), rng);
        const double ref = oracle::phi(f, k, u1, m.alpha, m.beta, m.gamma, w, g.dy());
        const double got = phi_k({k, std::vector<Complex>(f.data(), f.data() + f.size())}, shear, m, g);
        worst = std::max(worst, std::abs(got - ref) / std::abs(ref));
    }
    return worst;
}

// --- criterion 7 -------------------------------------------------------------

std::pair<int, double> multiplier_property() {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    int bad = 0;
    double min_ratio = INFINITY;
    const Grid g(16, 65, 4.0);
    const auto couette = build_shear(ShearKind::couette, {}, g);
    const auto tanh = build_shear(ShearKind::tanh_perturbed, {0.7, {}, 1e3}, g);
    for (int s = 0; s < 1000; ++s) {
        HypoEpsilons eps;
        eps.alpha = std::pow(10.0, -3.0 + 3.0 * unit(rng));
        eps.gamma = std::pow(10.0, -3.0 + 3.0 * unit(rng));
        eps.beta = std::max(1e-300, unit(rng)) * std::sqrt(eps.alpha * eps.gamma / 8.0);
        const double A = std::pow(10.0, 6.0 * unit(rng));
        const int k = 1 + static_cast<int>(unit(rng) * 32);
        const Multipliers m = multipliers(A, k, eps);
        const oracle::CVec f = oracle::random_profile(g.ny(), rng);
        const std::vector<Complex> prof(f.data(), f.data() + f.size());
        const PhiTerms t = phi_k_terms(prof, k, s % 2 ? couette.u1 : tanh.u1, m, g);
        const double ratio = t.total() / t.mass;
        min_ratio = std::min(min_ratio, ratio);
        if (!(ratio >= 0.5)) ++bad;
    }
    return {bad, min_ratio};
}

}  // namespace

int main(int argc, char** argv) {
    const std::string out = argc > 1 ? argv[1] : "";
    try {
        // Shared suppression run (criteria 1, 3, 4, 5, 8).
        const RunConfig sup_cfg = scenario_config("suppression", with_output({}, out, "suppression"));
        const double A = sup_cfg.effective_A();
        const double a3 = std::cbrt(A);
        const RunResult sup = execute(sup_cfg);
        const auto& recs = sup.outcome.records;
        const PKSState init = initial_state(sup_cfg);

        // 1. mass conservation and runtime
        {
            const double m0 = recs.front().mass;
            double drift = 0.0;
            for (const auto& r : recs) drift = std::max(drift, std::abs(r.mass - m0) / m0);
            const bool ok = sup.outcome.status == RunStatus::completed && drift <= 1e-8 && sup.wall_seconds <= 120.0;
            report(1, ok,
                   fmt("status=%s records=%zu max_rel_mass_drift=%.3e runtime=%.1fs (limit 120s)",
                       to_string(sup.outcome.status), recs.size(), drift, sup.wall_seconds));
        }

        // 2. enhanced-dissipation scaling of the passive scalar
        std::vector<MonitorRecord> passive_records;
        {
            const auto t0 = std::chrono::steady_clock::now();
            FitRequest fit;  // phi_k1 over [1, 2] A^{1/3}
            const SweepResult s =
                sweep(std::string("passive_scalar_ed"), "model.A", {1e2, 1e3, 1e4}, fit, {},
                      out.empty() ? std::filesystem::path{} : std::filesystem::path(out) / "passive_sweep");
            const double runtime = seconds_since(t0);
            bool ok = s.slope.has_value() && runtime <= 300.0;
            std::string rates;
            for (const auto& row : s.rows) {
                const bool row_ok = row.fit && row.fit->rate >= 10.0 / row.value;
                ok = ok && row_ok;
                rates += fmt("A=%.0e:lambda=%.4g(r2=%.3f,10/A=%.1e) ", row.value, row.fit ? row.fit->rate : NAN,
                             row.fit ? row.fit->r_squared : NAN, 10.0 / row.value);
            }
            const double slope = s.slope.value_or(NAN);
            ok = ok && slope >= -0.48 && slope <= -0.18;
            report(2, ok, rates + fmt("slope=%.4f (target -1/3, band [-0.48,-0.18]) runtime=%.1fs", slope, runtime));
            const RunConfig pc = scenario_config("passive_scalar_ed", {{"model.A", "1000"}});
            passive_records = execute(pc).outcome.records;
        }

        // 3. F decay after the transient, and F bounds the nonzero-mode norms.
        // Judged on the same preset with ny = 1025. At ny = 257 the sheared modes reach
        // the y Nyquist wavenumber (t = pi/(k dy)) and recur (t = 2 pi/(k dy)) inside the
        // window, so the late-time F of that grid is not converged; it is reported alongside.
        std::vector<MonitorRecord> fine_records;
        {
            struct Decay {
                std::size_t pairs = 0;
                std::size_t increases = 0;
                double worst_growth = -INFINITY;
                double worst_gap = INFINITY;
            };
            const double t_tr = 5.0 * a3;
            auto decay = [&](const std::vector<MonitorRecord>& rs) {
                Decay d;
                for (std::size_t j = 0; j + 1 < rs.size(); ++j) {
                    if (rs[j].t < t_tr) continue;
                    ++d.pairs;
                    const double g = rs[j + 1].F_total / rs[j].F_total - 1.0;
                    d.worst_growth = std::max(d.worst_growth, g);
                    if (!(g <= 1e-8)) ++d.increases;
                }
                for (const auto& r : rs) d.worst_gap = std::min(d.worst_gap, r.F_total - r.h2_quantity());
                return d;
            };
            const RunResult fine =
                execute(scenario_config("suppression", with_output({{"grid.ny", "1025"}}, out, "suppression_ny1025")));
            fine_records = fine.outcome.records;
            const Decay f = decay(fine_records);
            const Decay c = decay(recs);
            const bool ok = fine.outcome.status == RunStatus::completed && f.pairs > 0 && f.increases == 0 &&
                            f.worst_gap >= -1e-8;
            report(3, ok,
                   fmt("ny=1025: %s, %zu pairs after t=%.1f, max rel change=%.3e (tol 1e-8), min(F-H2)=%.3e "
                       "(tol -1e-8), F %.3e -> %.3e, %.0fs | ny=257 (unresolved): %zu increases, max %.3e, "
                       "min(F-H2)=%.3e, F_end %.3e",
                       to_string(fine.outcome.status), f.pairs, t_tr, f.worst_growth, f.worst_gap,
                       fine_records.front().F_total, fine_records.back().F_total, fine.wall_seconds, c.increases,
                       c.worst_growth, c.worst_gap, recs.back().F_total));
        }

        // 4. blow-up vs suppression, subcritical control
        std::vector<MonitorRecord> blow_records, sub_records;
        {
            const RunResult blow = execute(scenario_config("blowup_noflow", with_output({}, out, "blowup_noflow")));
            const RunResult sub = execute(scenario_config(
                "blowup_noflow",
                with_output({{"initial_data.mass", fmt("%.17g", 0.5 * kCriticalMass)}}, out, "subcritical")));
            blow_records = blow.outcome.records;
            sub_records = sub.outcome.records;
            double sup_linf = 0.0;
            for (const auto& r : recs) sup_linf = std::max(sup_linf, r.n_linf);
            const double linf0 = recs.front().n_linf;
            const double nneq_drop = recs.front().nneq_l2 / recs.back().nneq_l2;
            const bool ok = blow.outcome.status == RunStatus::blowup_detected &&
                            sup.outcome.status == RunStatus::completed && sup_linf <= 10.0 * linf0 &&
                            nneq_drop >= 10.0 && sub.outcome.status == RunStatus::completed;
            report(4, ok,
                   fmt("no-flow: %s at t=%.4f (n_linf %.3g -> %.3g); A=%.0e: %s, sup n_linf/initial=%.3f, "
                       "nneq_l2 drop=%.3ex; subcritical no-flow: %s at t=%.2f",
                       to_string(blow.outcome.status), blow.outcome.final_state.t, blow_records.front().n_linf,
                       blow_records.back().n_linf, A, to_string(sup.outcome.status), sup_linf / linf0, nneq_drop,
                       to_string(sub.outcome.status), sub.outcome.final_state.t));
        }

        // 5. bootstrap quantities on the suppression run
        {
            const double n_in_sq = std::pow(lp_norm(init.n, 2.0), 2);
            const double h1 = recs.back().h1_accumulator;
            FitRequest fit{"h2", {5.0, sup_cfg.resolved_t_end() / a3}, true};
            std::optional<DecayFit> f;
            std::string why;
            try {
                f = fit_records(recs, sup_cfg.k_report, fit, A);
            } catch (const Error& e) {
                why = e.what();
            }
            const bool ok = h1 <= 8.0 * n_in_sq && f && f->rate > 0.0 && f->r_squared >= 0.9;
            report(5, ok,
                   fmt("h1_accum=%.4g <= 8||n_in||^2=%.4g; H2 fit on [%.1f, %.1f]: rate=%.4g r2=%.4f %s", h1,
                       8.0 * n_in_sq, f ? f->t_lo : NAN, f ? f->t_hi : NAN, f ? f->rate : NAN,
                       f ? f->r_squared : NAN, why.c_str()));
        }

        // 6. oracle equivalences
        {
            const double d = zero_mode_discrepancy();
            const auto [o1, o2] = helmholtz_orders();
            const double p = phi_oracle_worst();
            const bool ok = d <= 1e-8 && o1 >= 1.8 && o1 <= 2.2 && o2 >= 1.8 && o2 <= 2.2 && p <= 1e-8;
            report(6, ok,
                   fmt("(a) 2D vs 1D zero-mode rel L2=%.3e (tol 1e-8); (b) Helmholtz orders %.3f, %.3f (band "
                       "[1.8,2.2]); (c) phi_k vs oracle worst rel=%.3e over 20 slices (tol 1e-8)",
                       d, o1, o2, p));
        }

        // 7. multiplier constraint property test
        {
            const auto [bad, min_ratio] = multiplier_property();
            report(7, bad == 0,
                   fmt("1000 random (A,k,eps) samples: violations=%d, min Phi_k/||f_k||^2=%.4f (need >= 0.5)", bad,
                       min_ratio));
        }

        // 8. Nash monitor
        {
            const Grid g(8, 257, 8.0);
            std::vector<double> gauss(257);
            for (int j = 0; j < 257; ++j) gauss[j] = std::exp(-g.y(j) * g.y(j));
            const double value = nash_ratio(gauss, g);
            const double closed = std::pow(std::numbers::pi / 2, 1.0 / 6.0) / std::cbrt(std::numbers::pi);
            const double m = std::max({max_nash(recs), max_nash(blow_records), max_nash(sub_records),
                                       max_nash(passive_records), max_nash(fine_records)});
            const bool ok = m <= 1.0 && std::abs(value - closed) <= 1e-3 && std::abs(value - 0.736) <= 1e-3;
            report(8, ok,
                   fmt("max nash_ratio over acceptance runs=%.4f (<= 1); Gaussian at ny=257: %.6f vs %.6f", m,
                       value, closed));
        }
    } catch (const std::exception& e) {
        std::printf("acceptance aborted: %s\n", e.what());
        return 1;
    }
    std::printf("%d of 8 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
