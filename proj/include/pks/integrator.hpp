#pragma once

// IMEX-CNAB2 time stepping in spectral-x / finite-difference-y form.
//
// Per wavenumber k the stiff linear operator L_k (diffusion, chemical damping
// and the shear advection -i k u(y)) is advanced by Crank-Nicolson through one
// complex tridiagonal solve. The chemotaxis flux is extrapolated with
// variable-step Adams-Bashforth 2 (explicit Euler on the first step). The
// n -> c source of the parabolic chemical equation is linear and is averaged
// between the old and new n, so the linear part stays fully Crank-Nicolson.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#if defined(__SSE2__)
#include <immintrin.h>
#endif

#include "pks/errors.hpp"
#include "pks/grid.hpp"
#include "pks/hypocoercivity.hpp"
#include "pks/model.hpp"
#include "pks/monitors.hpp"
#include "pks/tridiag.hpp"

namespace pks {

inline constexpr double kCrankNicolsonTheta = 0.5;

enum class RunMode { pks, passive_scalar };
enum class RunStatus { completed, blowup_detected, aborted };

inline const char* to_string(RunStatus s) {
    switch (s) {
    case RunStatus::completed: return "completed";
    case RunStatus::blowup_detected: return "blowup_detected";
    case RunStatus::aborted: return "aborted";
    }
    return "?";
}

struct StepConfig {
    double dt_init = 1e-2;
    double dt_min = 1e-7;
    double dt_max = 0.1;
    double cfl = 0.75;
    double blowup_factor = 1e3;
    double t_end = 1.0;
    double negativity_tol = 1e-6;  // relative to ||n||_inf
    int output_stride = 100;  // steps between monitor records

    void validate() const {
        if (!(dt_min > 0.0 && dt_min <= dt_init && dt_init <= dt_max)) {
            throw ConfigError("time step bounds need 0 < dt_min <= dt_init <= dt_max");
        }
        if (!(cfl > 0.0 && cfl <= 1.0)) throw ConfigError("time.cfl must lie in (0, 1]");
        if (!(blowup_factor > 1.0)) throw ConfigError("time.blowup_factor must exceed 1");
        if (!(t_end > 0.0)) throw ConfigError("time.t_end must be positive");
        if (!(negativity_tol >= 0.0)) throw ConfigError("time.negativity_tol must be nonnegative");
        if (output_stride < 1) throw ConfigError("output.stride must be >= 1");
    }
};

namespace detail {
/// Flush-to-zero / denormals-are-zero for the lifetime of the guard. Decaying
/// high wavenumbers otherwise spend most of a run in subnormal arithmetic.
class FlushDenormals {
public:
#if defined(__SSE2__)
    FlushDenormals() : saved_(_mm_getcsr()) { _mm_setcsr(saved_ | 0x8040u); }
    ~FlushDenormals() { _mm_setcsr(saved_); }

private:
    unsigned saved_;
#endif
};
}  // namespace detail

// ---------------------------------------------------------------------------
// Implicit per-wavenumber solve

struct TridiagWorkspace {
    std::vector<Complex> lower, diag, upper;
};

/// Factors I - theta dt L_k for one wavenumber and damping (0 for n, 1 for c).
inline void factor_implicit(TridiagonalFactor<Complex>& f, int k, int k_adv, double A, std::span<const double> u,
                            int damping, double dy, double theta_dt, TridiagWorkspace& ws) {
    const std::size_t n = u.size();
    const double off = theta_dt / (A * dy * dy);
    const double diag_real = 1.0 + theta_dt / A * (2.0 / (dy * dy) + static_cast<double>(k) * k + damping);
    ws.lower.assign(n, Complex(-off, 0.0));
    ws.upper.assign(n, Complex(-off, 0.0));
    ws.diag.resize(n);
    for (std::size_t j = 0; j < n; ++j) ws.diag[j] = Complex(diag_real, theta_dt * k_adv * u[j]);
    ws.upper[0] = -2.0 * off;
    ws.lower[n - 1] = -2.0 * off;
    f.factor(ws.lower, ws.diag, ws.upper);
}

/// Overwrites rhs with the solution of (I - theta dt L_k) x = rhs.
inline void implicit_solve_profile(std::span<Complex> rhs, int k, int k_adv, double A, std::span<const double> u,
                                   int damping, double dy, double theta_dt, TridiagWorkspace& ws) {
    if (rhs.size() != u.size()) throw DimensionError("implicit_solve_profile: length mismatch");
    TridiagonalFactor<Complex> f;
    factor_implicit(f, k, k_adv, A, u, damping, dy, theta_dt, ws);
    f.solve(rhs);
}

/// f <- f + h L_k f + s1 a1 + s2 a2, in one pass (a1, a2 may be empty).
inline void explicit_update_k(std::span<Complex> f, int k, int k_adv, double A, std::span<const double> u,
                              int damping, double dy, double h, std::span<const Complex> a1, double s1,
                              std::span<const Complex> a2, double s2) {
    const std::size_t n = f.size();
    const double inv2 = 1.0 / (dy * dy);
    const double invA = 1.0 / A;
    const double shift = static_cast<double>(k) * k + damping;
    double* p = reinterpret_cast<double*>(f.data());
    const double* q1 = a1.empty() ? nullptr : reinterpret_cast<const double*>(a1.data());
    const double* q2 = a2.empty() ? nullptr : reinterpret_cast<const double*>(a2.data());
    // Reflected ghost nodes give the Neumann stencil 2 (f_1 - f_0) / dy^2 at the walls.
    double pr = p[2], pi = p[3];
    for (std::size_t j = 0; j < n; ++j) {
        const double cr = p[2 * j], ci = p[2 * j + 1];
        const double nr = j + 1 < n ? p[2 * j + 2] : pr;
        const double ni = j + 1 < n ? p[2 * j + 3] : pi;
        const double ku = k_adv * u[j];
        const double lr = invA * ((nr + pr - 2.0 * cr) * inv2 - shift * cr) + ku * ci;
        const double li = invA * ((ni + pi - 2.0 * ci) * inv2 - shift * ci) - ku * cr;
        double vr = cr + h * lr, vi = ci + h * li;
        if (q1) {
            vr += s1 * q1[2 * j];
            vi += s1 * q1[2 * j + 1];
        }
        if (q2) {
            vr += s2 * q2[2 * j];
            vi += s2 * q2[2 * j + 1];
        }
        p[2 * j] = vr;
        p[2 * j + 1] = vi;
        pr = cr;
        pi = ci;
    }
}

/// Solves (I - theta dt [(1/A)(Dyy - k^2 - damping) - i k u]) x = b for one slice.
inline SpectralSlice implicit_solve_k(const SpectralSlice& b, double dt, const ModelParams& params,
                                      const ShearProfile& shear, const Grid& g, int damping) {
    if (!(dt > 0.0)) throw DomainError("implicit_solve_k needs dt > 0");
    if (b.profile.size() != static_cast<std::size_t>(g.ny())) throw DimensionError("implicit_solve_k: bad slice");
    const int ak = std::abs(b.k);
    // Negative wavenumbers advect with -k; the Nyquist slot carries no x-derivative.
    const int k_adv = ak == g.nyquist() ? 0 : b.k;
    SpectralSlice x = b;
    TridiagWorkspace ws;
    implicit_solve_profile(x.profile, ak, k_adv, params.A, shear.u, damping, g.dy(), kCrankNicolsonTheta * dt, ws);
    return x;
}

// ---------------------------------------------------------------------------
// Time step control

struct DtProposal {
    double dt = 0.0;
    bool underflow = false;  // the unclamped CFL step fell below dt_min
};

inline DtProposal dt_from_velocities(const Grid& g, double max_u, double max_dxc, double max_dyc, double A,
                                     const StepConfig& cfg) {
    double limit = std::numeric_limits<double>::infinity();
    if (max_u > 0.0) limit = std::min(limit, g.dx() / max_u);
    if (max_dxc > 0.0) limit = std::min(limit, A * g.dx() / max_dxc);
    if (max_dyc > 0.0) limit = std::min(limit, A * g.dy() / max_dyc);
    const double raw = cfg.cfl * limit;
    if (!(raw >= cfg.dt_min)) return {cfg.dt_min, true};
    return {std::min(raw, cfg.dt_max), false};
}

inline DtProposal adapt_dt(const PKSState& s, const ShearProfile& shear, const ModelParams& params,
                           const StepConfig& cfg) {
    require_finite(s.n, "adapt_dt");
    require_finite(s.c, "adapt_dt");
    const ChemotaxisTerm chem = chemotaxis_flux_spectral(to_spectral(s.n), to_spectral(s.c));
    return dt_from_velocities(s.n.grid(), shear.max_abs_u(), chem.max_dxc, chem.max_dyc, params.A, cfg);
}

// ---------------------------------------------------------------------------
// Stepper

/// Everything needed to continue a run bit-for-bit.
struct StepperSnapshot {
    double t = 0.0;
    std::uint64_t steps = 0;
    double dt_prev = 0.0;
    bool has_history = false;
    SpectralField n_hat;
    SpectralField c_hat;
    SpectralField nonlinear_prev;
};

class ImexStepper {
public:
    ImexStepper(const PKSState& init, ShearProfile shear, ModelParams params, RunMode mode)
        : shear_(std::move(shear)),
          params_(params),
          mode_(mode),
          grid_(init.n.grid()),
          n_hat_(to_spectral(init.n)),
          c_hat_(to_spectral(init.c)),
          nonlinear_prev_(grid_) {
        params_.validate();
        require_same_grid(init.n.grid(), init.c.grid(), "ImexStepper");
        require_finite(init.n, "ImexStepper");
        require_finite(init.c, "ImexStepper");
        if (shear_.u.size() != static_cast<std::size_t>(grid_.ny())) {
            throw DimensionError("shear profile is sampled on a different grid");
        }
        t_ = init.t;
        if (mode_ == RunMode::passive_scalar) {
            c_hat_ = SpectralField(grid_);
        } else if (params_.epsilon == 0) {
            chem_elliptic_solve(n_hat_, helmholtz_, c_hat_);
        }
    }

    ImexStepper(const StepperSnapshot& snap, ShearProfile shear, ModelParams params, RunMode mode)
        : shear_(std::move(shear)),
          params_(params),
          mode_(mode),
          grid_(snap.n_hat.grid()),
          n_hat_(snap.n_hat),
          c_hat_(snap.c_hat),
          nonlinear_prev_(snap.nonlinear_prev),
          t_(snap.t),
          dt_prev_(snap.dt_prev),
          has_history_(snap.has_history),
          steps_(snap.steps) {
        params_.validate();
    }

    double t() const { return t_; }
    std::uint64_t steps() const { return steps_; }
    const Grid& grid() const { return grid_; }
    const SpectralField& n_hat() const { return n_hat_; }
    const SpectralField& c_hat() const { return c_hat_; }
    const ShearProfile& shear() const { return shear_; }
    const ModelParams& params() const { return params_; }
    RunMode mode() const { return mode_; }

    PKSState state() const { return {t_, to_physical(n_hat_), to_physical(c_hat_)}; }

    StepperSnapshot snapshot() const {
        return {t_, steps_, dt_prev_, has_history_, n_hat_, c_hat_, nonlinear_prev_};
    }

    DtProposal propose_dt(const StepConfig& cfg) {
        if (mode_ == RunMode::passive_scalar) {
            return dt_from_velocities(grid_, shear_.max_abs_u(), 0.0, 0.0, params_.A, cfg);
        }
        const ChemotaxisTerm& chem = current_chemotaxis();
        return dt_from_velocities(grid_, shear_.max_abs_u(), chem.max_dxc, chem.max_dyc, params_.A, cfg);
    }

    void advance(double dt) {
        if (!(dt > 0.0) || !std::isfinite(dt)) throw DomainError("step size must be positive");
        const detail::FlushDenormals ftz;
        const double theta_dt = kCrankNicolsonTheta * dt;
        const double explicit_dt = (1.0 - kCrankNicolsonTheta) * dt;
        const double invA = 1.0 / params_.A;

        const bool nonlinear = mode_ == RunMode::pks;
        SpectralField& forcing = forcing_;  // AB2-extrapolated -(1/A) div(n grad c)
        SpectralField& current = current_;
        if (nonlinear) {
            const ChemotaxisTerm& chem = current_chemotaxis();
            // The flux is dealiased, so only k <= kmax carries data.
            const std::size_t live = static_cast<std::size_t>(grid_.dealias_kmax() + 1) * grid_.ny();
            auto cur = current.data();
            auto src = chem.div_flux.data();
            for (std::size_t i = 0; i < live; ++i) cur[i] = -invA * src[i];
            auto f = forcing.data();
            if (has_history_) {
                const double r = dt / dt_prev_;
                const double a = 1.0 + 0.5 * r;
                const double b = -0.5 * r;
                auto prev = nonlinear_prev_.data();
                for (std::size_t i = 0; i < live; ++i) f[i] = a * cur[i] + b * prev[i];
            } else {
                std::copy(cur.begin(), cur.begin() + static_cast<std::ptrdiff_t>(live), f.begin());
            }
        }

        refactor(theta_dt);
        if (nonlinear && params_.epsilon == 1) n_old_ = n_hat_;
        const std::span<const Complex> none;
        for (int k = 0; k < grid_.nk(); ++k) {
            const int ka = derivative_wavenumber(grid_, k);
            auto nk = n_hat_.profile(k);
            explicit_update_k(nk, k, ka, params_.A, shear_.u, 0, grid_.dy(), explicit_dt,
                              nonlinear ? forcing.profile(k) : none, dt, none, 0.0);
        }
        batched_[0].solve(n_hat_.data());

        if (nonlinear && params_.epsilon == 1) {
            const double ws = dt * invA * kCrankNicolsonTheta;
            const double wo = dt * invA * (1.0 - kCrankNicolsonTheta);
            for (int k = 0; k < grid_.nk(); ++k) {
                const int ka = derivative_wavenumber(grid_, k);
                auto ck = c_hat_.profile(k);
                explicit_update_k(ck, k, ka, params_.A, shear_.u, 1, grid_.dy(), explicit_dt, n_hat_.profile(k), ws,
                                  n_old_.profile(k), wo);
            }
            batched_[1].solve(c_hat_.data());
        } else if (nonlinear) {
            chem_elliptic_solve(n_hat_, helmholtz_, c_hat_);
        }

        if (nonlinear) {
            std::swap(nonlinear_prev_, current_);
            has_history_ = true;
        }
        dt_prev_ = dt;
        t_ += dt;
        ++steps_;
        chem_valid_ = false;
        density_valid_ = false;
    }

    /// n in physical space, cached until the next step.
    const Field& density() {
        if (!density_valid_) {
            const detail::FlushDenormals ftz;
            to_physical(n_hat_, density_, chem_ws_.scratch);
            density_valid_ = true;
        }
        return density_;
    }

private:
    void refactor(double theta_dt) {
        if (theta_dt == factored_theta_dt_) return;
        const int dampings = mode_ == RunMode::pks && params_.epsilon == 1 ? 2 : 1;
        for (int d = 0; d < dampings; ++d) {
            factors_[d].resize(static_cast<std::size_t>(grid_.nk()));
            for (int k = 0; k < grid_.nk(); ++k) {
                factor_implicit(factors_[d][static_cast<std::size_t>(k)], k, derivative_wavenumber(grid_, k),
                                params_.A, shear_.u, d, grid_.dy(), theta_dt, ws_);
            }
            batched_[d].assign(factors_[d], static_cast<std::size_t>(grid_.ny()));
        }
        factored_theta_dt_ = theta_dt;
    }

    const ChemotaxisTerm& current_chemotaxis() {
        if (!chem_valid_) {
            const detail::FlushDenormals ftz;
            chemotaxis_flux_spectral(n_hat_, c_hat_, chem_ws_, chem_);
            chem_valid_ = true;
        }
        return chem_;
    }

    ShearProfile shear_;
    ModelParams params_;
    RunMode mode_;
    Grid grid_;
    SpectralField n_hat_;
    SpectralField c_hat_;
    SpectralField nonlinear_prev_;
    double t_ = 0.0;
    double dt_prev_ = 0.0;
    bool has_history_ = false;
    std::uint64_t steps_ = 0;
    ChemotaxisWorkspace chem_ws_{grid_};
    ChemotaxisTerm chem_{SpectralField(grid_)};
    bool chem_valid_ = false;
    SpectralField forcing_{grid_};
    SpectralField current_{grid_};
    Field density_{grid_};
    bool density_valid_ = false;
    TridiagWorkspace ws_;
    std::vector<TridiagonalFactor<Complex>> factors_[2];
    BatchedTridiagonal<Complex> batched_[2];
    double factored_theta_dt_ = -1.0;
    HelmholtzFactors helmholtz_{grid_};
    SpectralField n_old_{grid_};
};

/// One IMEX step from a state without history (Crank-Nicolson / explicit Euler).
inline PKSState step(const PKSState& s, const ShearProfile& shear, const ModelParams& params, double dt,
                     RunMode mode = RunMode::pks) {
    ImexStepper st(s, shear, params, mode);
    st.advance(dt);
    PKSState out = st.state();
    if (!out.n.all_finite() || !out.c.all_finite()) {
        throw DataError("step produced non-finite values at t = " + std::to_string(out.t));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Driver

struct RunOutcome {
    RunStatus status = RunStatus::completed;
    PKSState final_state;
    std::vector<MonitorRecord> records;
    std::string message;
    std::optional<StepperSnapshot> final_snapshot;
};

/// Continues `stepper` to cfg.t_end. `carry` is the last record of a previous
/// segment when resuming from a checkpoint.
inline RunOutcome run_from(ImexStepper& stepper, const StepConfig& cfg, const MonitorConfig& mon,
                           std::optional<MonitorRecord> carry = std::nullopt) {
    cfg.validate();
    mon.eps.validate();
    std::vector<MonitorRecord> records;

    auto make_record = [&](double dt) {
        const Field& n = stepper.density();
        const MonitorRecord* prev = !records.empty() ? &records.back() : (carry ? &*carry : nullptr);
        return update_monitors(stepper.t(), dt, n, stepper.n_hat(), stepper.c_hat(), stepper.shear(),
                               stepper.params(), mon, prev);
    };
    auto finish = [&](RunStatus status, std::string msg) {
        return RunOutcome{status, stepper.state(), std::move(records), std::move(msg), stepper.snapshot()};
    };

    DtProposal proposal = stepper.propose_dt(cfg);
    double dt = stepper.steps() == 0 ? std::min(cfg.dt_init, proposal.dt) : proposal.dt;
    if (!carry) {
        MonitorRecord r0 = make_record(dt);
        if (r0.blowup_flag == BlowupFlag::aborted) {
            records.push_back(r0);
            return finish(RunStatus::aborted, "non-finite initial data");
        }
        records.push_back(r0);
    }
    const double n_linf0 = carry ? carry->n_linf_initial : records.front().n_linf_initial;
    const BlowupCriteria criteria{cfg.blowup_factor, cfg.dt_min, n_linf0};

    const double t_tol = 1e-12 * std::max(1.0, std::abs(cfg.t_end));
    std::uint64_t since_record = 0;
    while (stepper.t() < cfg.t_end - t_tol) {
        if (proposal.underflow) {
            MonitorRecord r = make_record(proposal.dt);
            r.blowup_flag = BlowupFlag::blowup;
            records.push_back(std::move(r));
            return finish(RunStatus::blowup_detected, "time step fell below dt_min");
        }
        const double h = std::min(dt, cfg.t_end - stepper.t());
        stepper.advance(h);
        ++since_record;

        const Field& n = stepper.density();
        if (!n.all_finite()) {
            records.push_back(aborted_record(stepper.t(), dt));
            return finish(RunStatus::aborted, "non-finite density at t = " + std::to_string(stepper.t()));
        }
        double n_max = 0.0, n_min = 0.0;
        for (double v : n.values()) {
            n_max = std::max(n_max, std::abs(v));
            n_min = std::min(n_min, v);
        }
        proposal = stepper.propose_dt(cfg);
        dt = proposal.dt;
        if (n_max >= criteria.factor * criteria.initial_n_linf) {
            MonitorRecord r = make_record(dt);
            r.blowup_flag = BlowupFlag::blowup;
            records.push_back(std::move(r));
            return finish(RunStatus::blowup_detected, "||n||_inf exceeded blowup_factor x initial");
        }
        if (stepper.mode() == RunMode::pks && n_min < -cfg.negativity_tol * n_max) {
            MonitorRecord r = make_record(dt);
            r.blowup_flag = BlowupFlag::aborted;
            records.push_back(std::move(r));
            return finish(RunStatus::aborted, "density became negative (min " + std::to_string(n_min) +
                                                  ") at t = " + std::to_string(stepper.t()));
        }
        const bool last = !(stepper.t() < cfg.t_end - t_tol);
        if (since_record >= static_cast<std::uint64_t>(cfg.output_stride) || last) {
            MonitorRecord r = make_record(dt);
            if (proposal.underflow) r.blowup_flag = BlowupFlag::blowup;
            records.push_back(std::move(r));
            since_record = 0;
        }
    }
    return finish(RunStatus::completed, "reached t_end");
}

inline RunOutcome run(const PKSState& init, const ShearProfile& shear, const ModelParams& params,
                      const StepConfig& cfg, RunMode mode, const MonitorConfig& mon = {}) {
    ImexStepper stepper(init, shear, params, mode);
    return run_from(stepper, cfg, mon);
}

// ---------------------------------------------------------------------------
// Checkpoints
//
// Binary, host byte order (little-endian on all supported targets):
//   char[8]  "PKSCKPT\0"
//   u32      format version (1)
//   u32      mode (0 pks, 1 passive_scalar)
//   i32 nx, i32 ny, f64 Ly, f64 A, i32 epsilon
//   u64      config hash
//   f64 t, u64 steps, f64 dt_prev, u8 has_history
//   3 x (nx/2+1)*ny complex<f64>: n_hat, c_hat, AB2 history, k-major
//   f64 x 6  monitor carry: t, h1_accumulator, h1_rate, sup_n0_lq, dyc_in0_lp, n_linf_initial

inline constexpr char kCheckpointMagic[8] = {'P', 'K', 'S', 'C', 'K', 'P', 'T', '\0'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    RunMode mode = RunMode::pks;
    ModelParams params;
    std::uint64_t config_hash = 0;
    StepperSnapshot snapshot;
    MonitorRecord carry;
};

namespace detail {
template <class T>
void put(std::ofstream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <class T>
T get(std::ifstream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw IoError("checkpoint truncated");
    return v;
}
}  // namespace detail

inline void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open checkpoint for writing: " + path.string());
    const auto& s = ck.snapshot;
    const Grid& g = s.n_hat.grid();
    os.write(kCheckpointMagic, sizeof(kCheckpointMagic));
    detail::put(os, kCheckpointVersion);
    detail::put(os, static_cast<std::uint32_t>(ck.mode == RunMode::pks ? 0 : 1));
    detail::put(os, static_cast<std::int32_t>(g.nx()));
    detail::put(os, static_cast<std::int32_t>(g.ny()));
    detail::put(os, g.Ly());
    detail::put(os, ck.params.A);
    detail::put(os, static_cast<std::int32_t>(ck.params.epsilon));
    detail::put(os, ck.config_hash);
    detail::put(os, s.t);
    detail::put(os, s.steps);
    detail::put(os, s.dt_prev);
    detail::put(os, static_cast<std::uint8_t>(s.has_history ? 1 : 0));
    for (const SpectralField* f : {&s.n_hat, &s.c_hat, &s.nonlinear_prev}) {
        os.write(reinterpret_cast<const char*>(f->data().data()),
                 static_cast<std::streamsize>(f->data().size() * sizeof(Complex)));
    }
    for (double v : {ck.carry.t, ck.carry.h1_accumulator, ck.carry.h1_rate, ck.carry.sup_n0_lq,
                     ck.carry.dyc_in0_lp, ck.carry.n_linf_initial}) {
        detail::put(os, v);
    }
    if (!os) throw IoError("failed writing checkpoint: " + path.string());
}

inline Checkpoint read_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open checkpoint: " + path.string());
    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
        throw IoError("not a checkpoint file: " + path.string());
    }
    const auto version = detail::get<std::uint32_t>(is);
    if (version != kCheckpointVersion) throw IoError("unsupported checkpoint version " + std::to_string(version));
    const RunMode mode = detail::get<std::uint32_t>(is) == 0 ? RunMode::pks : RunMode::passive_scalar;
    const auto nx = detail::get<std::int32_t>(is);
    const auto ny = detail::get<std::int32_t>(is);
    const auto Ly = detail::get<double>(is);
    ModelParams params;
    params.A = detail::get<double>(is);
    params.epsilon = detail::get<std::int32_t>(is);
    const auto hash = detail::get<std::uint64_t>(is);
    const Grid g(nx, ny, Ly);
    StepperSnapshot s{0.0, 0, 0.0, false, SpectralField(g), SpectralField(g), SpectralField(g)};
    s.t = detail::get<double>(is);
    s.steps = detail::get<std::uint64_t>(is);
    s.dt_prev = detail::get<double>(is);
    s.has_history = detail::get<std::uint8_t>(is) != 0;
    for (SpectralField* f : {&s.n_hat, &s.c_hat, &s.nonlinear_prev}) {
        is.read(reinterpret_cast<char*>(f->data().data()),
                static_cast<std::streamsize>(f->data().size() * sizeof(Complex)));
        if (!is) throw IoError("checkpoint truncated");
    }
    MonitorRecord carry;
    carry.t = detail::get<double>(is);
    carry.h1_accumulator = detail::get<double>(is);
    carry.h1_rate = detail::get<double>(is);
    carry.sup_n0_lq = detail::get<double>(is);
    carry.dyc_in0_lp = detail::get<double>(is);
    carry.n_linf_initial = detail::get<double>(is);
    return Checkpoint{mode, params, hash, std::move(s), std::move(carry)};
}

}  // namespace pks
