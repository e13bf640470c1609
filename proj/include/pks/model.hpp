#pragma once

// Right-hand sides of the shear-advected Keller-Segel system in rescaled time
// (t_rescaled = A t_original):
//
//   dn/dt = (1/A) Lap n - u(y) dx n - (1/A) div(n grad c)
//   dc/dt = (1/A) (Lap c + n - c) - u(y) dx c            (epsilon = 1)
//   0     = Lap c + n - c                                 (epsilon = 0)
//
// Per x-wavenumber k the linear part is
//   L_k f = (1/A) (Dyy - k^2 - d) f - i k u(y) f,   d = 0 for n, 1 for c.

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pks/errors.hpp"
#include "pks/grid.hpp"
#include "pks/tridiag.hpp"

namespace pks {

struct ModelParams {
    double A = 1.0;
    int epsilon = 1;
    std::optional<double> mass_target;

    void validate() const {
        if (!(A > 0.0) || !std::isfinite(A)) throw ConfigError("model.A must be positive");
        if (epsilon != 0 && epsilon != 1) throw ConfigError("model.epsilon must be 0 or 1");
        if (mass_target && !(*mass_target > 0.0)) throw ConfigError("model.mass_target must be positive");
    }
};

// ---------------------------------------------------------------------------
// Shear profiles

/// `zero` is the flowless reference (A u == 0); it is exempt from the
/// monotonicity requirement and only used to contrast against sheared runs.
enum class ShearKind { couette, tanh_perturbed, custom, zero };

inline constexpr std::array<std::string_view, 4> kShearNames = {"couette", "tanh_perturbed", "custom", "zero"};

inline std::string_view shear_name(ShearKind k) { return kShearNames[static_cast<std::size_t>(k)]; }

inline ShearKind parse_shear_kind(std::string_view name) {
    for (std::size_t i = 0; i < kShearNames.size(); ++i) {
        if (kShearNames[i] == name) return static_cast<ShearKind>(i);
    }
    std::string valid;
    for (auto n : kShearNames) {
        if (!valid.empty()) valid += ", ";
        valid += n;
    }
    throw ConfigError("unknown shear '" + std::string(name) +
                      "': only strictly increasing profiles are supported; valid names: " + valid);
}

struct ShearParams {
    double a = 0.0;                     // tanh_perturbed amplitude, |a| < 1
    std::vector<double> coefficients;   // custom: u(y) = sum c_i y^i
    double derivative_cap = 1e3;        // bound on max(|u'|, |u''|, |u'''|)
};

struct ShearProfile {
    ShearKind kind = ShearKind::couette;
    std::vector<double> u, u1, u2, u3;

    bool flowless() const { return kind == ShearKind::zero; }
    double max_abs_u() const {
        double m = 0.0;
        for (double v : u) m = std::max(m, std::abs(v));
        return m;
    }
    double min_u1() const { return *std::min_element(u1.begin(), u1.end()); }
};

inline ShearProfile build_shear(ShearKind kind, const ShearParams& params, const Grid& grid) {
    const auto ny = static_cast<std::size_t>(grid.ny());
    ShearProfile s;
    s.kind = kind;
    s.u.assign(ny, 0.0);
    s.u1.assign(ny, 0.0);
    s.u2.assign(ny, 0.0);
    s.u3.assign(ny, 0.0);
    switch (kind) {
    case ShearKind::zero:
        return s;
    case ShearKind::couette:
        for (std::size_t j = 0; j < ny; ++j) {
            s.u[j] = grid.y(static_cast<int>(j));
            s.u1[j] = 1.0;
        }
        break;
    case ShearKind::tanh_perturbed: {
        const double a = params.a;
        if (!(std::abs(a) < 1.0)) {
            throw ConfigError("tanh_perturbed shear needs |a| < 1 for strict monotonicity, got a = " +
                              std::to_string(a));
        }
        for (std::size_t j = 0; j < ny; ++j) {
            const double y = grid.y(static_cast<int>(j));
            const double th = std::tanh(y);
            const double sech2 = 1.0 - th * th;
            s.u[j] = y + a * th;
            s.u1[j] = 1.0 + a * sech2;
            s.u2[j] = -2.0 * a * sech2 * th;
            s.u3[j] = -2.0 * a * (sech2 * sech2 - 2.0 * sech2 * th * th);
        }
        break;
    }
    case ShearKind::custom: {
        const auto& c = params.coefficients;
        if (c.empty()) throw ConfigError("custom shear needs polynomial coefficients");
        for (std::size_t j = 0; j < ny; ++j) {
            const double y = grid.y(static_cast<int>(j));
            std::array<double, 4> d{};  // u, u', u'', u'''
            for (std::size_t p = 0; p < c.size(); ++p) {
                double fall = 1.0;  // p (p-1) ... falling factorial
                for (std::size_t order = 0; order < 4 && order <= p; ++order) {
                    d[order] += c[p] * fall * std::pow(y, static_cast<double>(p - order));
                    fall *= static_cast<double>(p - order);
                }
            }
            s.u[j] = d[0];
            s.u1[j] = d[1];
            s.u2[j] = d[2];
            s.u3[j] = d[3];
        }
        break;
    }
    }
    if (!(s.min_u1() > 0.0)) {
        throw ConfigError("shear '" + std::string(shear_name(kind)) +
                          "' is not strictly increasing on the grid (min u' = " + std::to_string(s.min_u1()) +
                          "); decreasing profiles are rejected");
    }
    double cap = 0.0;
    for (std::size_t j = 0; j < ny; ++j) {
        cap = std::max({cap, std::abs(s.u1[j]), std::abs(s.u2[j]), std::abs(s.u3[j])});
    }
    if (!(cap <= params.derivative_cap)) {
        throw ConfigError("shear derivatives exceed the configured W^{2,inf} cap");
    }
    return s;
}

// ---------------------------------------------------------------------------

struct PKSState {
    double t = 0.0;
    Field n;
    Field c;
};

/// out = L_k f for one wavenumber.
inline void apply_linear_k(std::span<const Complex> f, int k, int k_adv, double A, std::span<const double> u,
                           int damping, double dy, std::span<Complex> out) {
    neumann_dyy<Complex>(f, dy, out);
    const double shift = static_cast<double>(k) * k + damping;
    const double invA = 1.0 / A;
    for (std::size_t j = 0; j < f.size(); ++j) {
        out[j] = invA * (out[j] - shift * f[j]) - Complex(0.0, k_adv * u[j]) * f[j];
    }
}

inline void dealias(SpectralField& s) {
    const Grid& g = s.grid();
    for (int k = g.dealias_kmax() + 1; k < g.nk(); ++k) {
        for (auto& v : s.profile(k)) v = 0.0;
    }
}

struct ChemotaxisTerm {
    SpectralField div_flux;  // div(n grad c), 2/3-rule dealiased
    double max_dxc = 0.0;
    double max_dyc = 0.0;
};

/// Buffers reused across chemotaxis evaluations on one grid.
struct ChemotaxisWorkspace {
    explicit ChemotaxisWorkspace(const Grid& g)
        : nf(g), cf(g), cx(g), xflux(g), ydiv(g), xhat(g), yhat(g), prev_flux(static_cast<std::size_t>(g.nx())) {}
    Field nf, cf, cx, xflux, ydiv;
    SpectralField xhat, yhat;
    std::vector<Complex> scratch;
    std::vector<double> prev_flux;
};

/// div(n grad c) = dx(n dx c) + dy(n dy c). Both factors are truncated to
/// |k| <= nx/3 before products are formed and the result is truncated again.
/// The y part is a conservative flux difference on half nodes with zero flux
/// through the walls, so every x-row of the result integrates to zero.
inline void chemotaxis_flux_spectral(const SpectralField& n_hat, const SpectralField& c_hat, ChemotaxisWorkspace& ws,
                                     ChemotaxisTerm& out) {
    const Grid& g = n_hat.grid();
    require_same_grid(g, c_hat.grid(), "chemotaxis_flux");
    require_same_grid(g, ws.nf.grid(), "chemotaxis_flux");
    const int kmax = g.dealias_kmax();
    to_physical_filtered(n_hat, ws.nf, ws.scratch, kmax, false);
    to_physical_filtered(c_hat, ws.cf, ws.scratch, kmax, false);
    to_physical_filtered(c_hat, ws.cx, ws.scratch, kmax, true);

    const std::size_t nx = static_cast<std::size_t>(g.nx());
    const std::size_t ny = static_cast<std::size_t>(g.ny());
    const double dy = g.dy();
    const double* n = ws.nf.values().data();
    const double* c = ws.cf.values().data();
    const double* cx = ws.cx.values().data();
    double* xf = ws.xflux.values().data();
    double* yd = ws.ydiv.values().data();
    double max_dxc = 0.0, max_dyc = 0.0;
    for (std::size_t idx = 0; idx < g.size(); ++idx) {
        xf[idx] = n[idx] * cx[idx];
        max_dxc = std::max(max_dxc, std::abs(cx[idx]));
    }
    // Row j of ydiv is (F_{j+1/2} - F_{j-1/2}) / dy with F = 0 at the walls,
    // halved cells at the boundary rows.
    std::fill(ws.prev_flux.begin(), ws.prev_flux.end(), 0.0);
    for (std::size_t j = 0; j + 1 < ny; ++j) {
        const double h = j == 0 ? 0.5 * dy : dy;
        for (std::size_t i = 0; i < nx; ++i) {
            const std::size_t a = j * nx + i;
            const double grad = (c[a + nx] - c[a]) / dy;
            max_dyc = std::max(max_dyc, std::abs(grad));
            const double flux = 0.5 * (n[a] + n[a + nx]) * grad;
            yd[a] = (flux - ws.prev_flux[i]) / h;
            ws.prev_flux[i] = flux;
        }
    }
    for (std::size_t i = 0; i < nx; ++i) yd[(ny - 1) * nx + i] = -ws.prev_flux[i] / (0.5 * dy);

    g.fft().forward(ws.xflux.values().data(), ws.xhat.data().data());
    g.fft().forward(ws.ydiv.values().data(), ws.yhat.data().data());
    require_same_grid(g, out.div_flux.grid(), "chemotaxis_flux");
    const double scale = 1.0 / g.nx();
    for (int k = 0; k < g.nk(); ++k) {
        auto dst = out.div_flux.profile(k);
        if (k > kmax) {
            std::fill(dst.begin(), dst.end(), Complex(0.0, 0.0));
            continue;
        }
        // Unnormalized transforms: fold in 1/nx, the origin phase and i k.
        const double s = scale * x_origin_phase(k);
        const double w = s * derivative_wavenumber(g, k);
        auto xs = ws.xhat.profile(k);
        auto ys = ws.yhat.profile(k);
        for (std::size_t j = 0; j < ny; ++j) {
            dst[j] = Complex(s * ys[j].real() - w * xs[j].imag(), s * ys[j].imag() + w * xs[j].real());
        }
    }
    out.max_dxc = max_dxc;
    out.max_dyc = max_dyc;
}

inline ChemotaxisTerm chemotaxis_flux_spectral(const SpectralField& n_hat, const SpectralField& c_hat) {
    ChemotaxisWorkspace ws(n_hat.grid());
    ChemotaxisTerm out{SpectralField(n_hat.grid())};
    chemotaxis_flux_spectral(n_hat, c_hat, ws, out);
    return out;
}

inline Field chemotaxis_flux(const Field& n, const Field& c) {
    require_same_grid(n.grid(), c.grid(), "chemotaxis_flux");
    require_finite(n, "chemotaxis_flux");
    require_finite(c, "chemotaxis_flux");
    return to_physical(chemotaxis_flux_spectral(to_spectral(n), to_spectral(c)).div_flux);
}

struct Rhs {
    Field dn;
    Field dc;
};

inline Rhs assemble_rhs(const PKSState& state, const ShearProfile& shear, const ModelParams& params) {
    params.validate();
    if (params.epsilon == 0) {
        throw MisuseError("assemble_rhs handles epsilon = 1 only; use chem_elliptic_solve for epsilon = 0");
    }
    require_same_grid(state.n.grid(), state.c.grid(), "assemble_rhs");
    require_finite(state.n, "assemble_rhs");
    require_finite(state.c, "assemble_rhs");
    const Grid& g = state.n.grid();
    const SpectralField n_hat = to_spectral(state.n);
    const SpectralField c_hat = to_spectral(state.c);
    const ChemotaxisTerm chem = chemotaxis_flux_spectral(n_hat, c_hat);
    SpectralField dn(g);
    SpectralField dc(g);
    const double invA = 1.0 / params.A;
    for (int k = 0; k < g.nk(); ++k) {
        const int ka = derivative_wavenumber(g, k);
        apply_linear_k(n_hat.profile(k), k, ka, params.A, shear.u, 0, g.dy(), dn.profile(k));
        apply_linear_k(c_hat.profile(k), k, ka, params.A, shear.u, 1, g.dy(), dc.profile(k));
        auto dnk = dn.profile(k);
        auto dck = dc.profile(k);
        auto chk = chem.div_flux.profile(k);
        auto nk = n_hat.profile(k);
        for (int j = 0; j < g.ny(); ++j) {
            dnk[j] -= invA * chk[j];
            dck[j] += invA * nk[j];
        }
    }
    return {to_physical(dn), to_physical(dc)};
}

// ---------------------------------------------------------------------------
// Parabolic-elliptic closure: (Dyy - k^2 - 1) c_k = -n_k for every k.

inline void helmholtz_coefficients(int k, double dy, int ny, std::vector<double>& lower, std::vector<double>& diag,
                                   std::vector<double>& upper) {
    const double inv = 1.0 / (dy * dy);
    lower.assign(static_cast<std::size_t>(ny), inv);
    upper.assign(static_cast<std::size_t>(ny), inv);
    diag.assign(static_cast<std::size_t>(ny), -2.0 * inv - static_cast<double>(k) * k - 1.0);
    upper[0] = 2.0 * inv;
    lower[static_cast<std::size_t>(ny) - 1] = 2.0 * inv;
}

/// Per-k factorizations of the Helmholtz operator, reusable across solves.
class HelmholtzFactors {
public:
    explicit HelmholtzFactors(const Grid& g) : grid_(g) {}

    const TridiagonalFactor<double>& at(int k) const {
        if (factors_.empty()) build();
        return factors_[static_cast<std::size_t>(k)];
    }
    const Grid& grid() const { return grid_; }

private:
    void build() const {
        std::vector<double> lo, di, up;
        factors_.resize(static_cast<std::size_t>(grid_.nk()));
        for (int k = 0; k < grid_.nk(); ++k) {
            helmholtz_coefficients(k, grid_.dy(), grid_.ny(), lo, di, up);
            factors_[static_cast<std::size_t>(k)].factor(lo, di, up);
        }
    }

    Grid grid_;
    mutable std::vector<TridiagonalFactor<double>> factors_;
};

inline void chem_elliptic_solve(const SpectralField& n_hat, const HelmholtzFactors& h, SpectralField& c_hat) {
    const Grid& g = n_hat.grid();
    require_same_grid(g, c_hat.grid(), "chem_elliptic_solve");
    require_same_grid(g, h.grid(), "chem_elliptic_solve");
    for (int k = 0; k < g.nk(); ++k) {
        auto rhs = c_hat.profile(k);
        auto src = n_hat.profile(k);
        for (int j = 0; j < g.ny(); ++j) rhs[j] = -src[j];
        h.at(k).solve(rhs);
    }
}

inline SpectralField chem_elliptic_solve(const SpectralField& n_hat) {
    SpectralField c_hat(n_hat.grid());
    chem_elliptic_solve(n_hat, HelmholtzFactors(n_hat.grid()), c_hat);
    return c_hat;
}

inline Field chem_elliptic_solve(const Field& n) {
    require_finite(n, "chem_elliptic_solve");
    return to_physical(chem_elliptic_solve(to_spectral(n)));
}

/// Discrete Lap c - c, for residual checks against the elliptic solve.
inline Field apply_helmholtz(const Field& c) {
    const Grid& g = c.grid();
    SpectralField c_hat = to_spectral(c);
    SpectralField out(g);
    for (int k = 0; k < g.nk(); ++k) {
        apply_linear_k(c_hat.profile(k), k, 0, 1.0, std::vector<double>(static_cast<std::size_t>(g.ny()), 0.0), 1,
                       g.dy(), out.profile(k));
    }
    return to_physical(out);
}

}  // namespace pks
