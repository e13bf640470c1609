#pragma once

// Discretization of the strip T x [-Ly, Ly]: periodic Fourier in x, uniform
// second-order finite differences in y with a no-flux closure at y = +-Ly.
//
// Storage conventions
//   Field          values[j * nx + i]      (x fastest)
//   SpectralField  data[k * ny + j]        k = 0 .. nx/2 (half spectrum)
//
// The x transform follows  f_k(y) = (1/2pi) int e^{-ikx} f(x,y) dx  with
// x_i = -pi + i dx, so a field is recovered as  f = sum_k f_k(y) e^{ikx}.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <fftw3.h>

#include "pks/errors.hpp"

namespace pks {

using Complex = std::complex<double>;

namespace detail {

inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

/// Batched real <-> half-complex transforms along x for all ny rows at once.
/// Plans are created with FFTW_UNALIGNED so they can be executed on caller
/// buffers from several threads.
class FftPlans {
public:
    FftPlans(int nx, int ny) : nx_(nx), ny_(ny) {
        const int nk = nx / 2 + 1;
        std::vector<double> real(static_cast<std::size_t>(nx) * ny);
        std::vector<Complex> cplx(static_cast<std::size_t>(nk) * ny);
        auto* cp = reinterpret_cast<fftw_complex*>(cplx.data());
        const int n[] = {nx};
        std::lock_guard lock(fftw_planner_mutex());
        forward_ = fftw_plan_many_dft_r2c(1, n, ny, real.data(), nullptr, 1, nx, cp, nullptr, ny, 1,
                                          FFTW_MEASURE | FFTW_UNALIGNED);
        inverse_ = fftw_plan_many_dft_c2r(1, n, ny, cp, nullptr, ny, 1, real.data(), nullptr, 1, nx,
                                          FFTW_MEASURE | FFTW_UNALIGNED | FFTW_DESTROY_INPUT);
        if (forward_ == nullptr || inverse_ == nullptr) {
            throw InternalError("FFTW failed to create x-transform plans");
        }
    }
    FftPlans(const FftPlans&) = delete;
    FftPlans& operator=(const FftPlans&) = delete;
    ~FftPlans() {
        std::lock_guard lock(fftw_planner_mutex());
        fftw_destroy_plan(forward_);
        fftw_destroy_plan(inverse_);
    }

    // Unnormalized: out[k*ny + j] = sum_i in[j*nx + i] e^{-2 pi i k i / nx}.
    void forward(const double* in, Complex* out) const {
        fftw_execute_dft_r2c(forward_, const_cast<double*>(in), reinterpret_cast<fftw_complex*>(out));
    }
    // Destroys `in`.
    void inverse(Complex* in, double* out) const {
        fftw_execute_dft_c2r(inverse_, reinterpret_cast<fftw_complex*>(in), out);
    }

private:
    int nx_;
    int ny_;
    fftw_plan forward_ = nullptr;
    fftw_plan inverse_ = nullptr;
};

/// Plans are built once per shape and shared by every grid of that shape.
inline std::shared_ptr<const FftPlans> shared_plans(int nx, int ny) {
    static std::mutex m;
    static std::map<std::pair<int, int>, std::shared_ptr<const FftPlans>> cache;
    std::lock_guard lock(m);
    auto& slot = cache[{nx, ny}];
    if (!slot) slot = std::make_shared<const FftPlans>(nx, ny);
    return slot;
}

inline bool is_power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

}  // namespace detail

class Grid {
public:
    static constexpr int kMinNx = 8;
    static constexpr int kMinNy = 17;

    Grid(int nx, int ny, double Ly) : nx_(nx), ny_(ny), Ly_(Ly) {
        if (nx < kMinNx || !detail::is_power_of_two(nx)) {
            throw ConfigError("grid.nx must be a power of two >= 8, got " + std::to_string(nx));
        }
        if (ny < kMinNy) {
            throw ConfigError("grid.ny must be >= 17, got " + std::to_string(ny));
        }
        if (!(Ly > 0.0) || !std::isfinite(Ly)) {
            throw ConfigError("grid.Ly must be positive and finite");
        }
        dx_ = 2.0 * std::numbers::pi / nx;
        dy_ = 2.0 * Ly / (ny - 1);
        weights_.assign(static_cast<std::size_t>(ny), dy_);
        weights_.front() = 0.5 * dy_;
        weights_.back() = 0.5 * dy_;
        plans_ = detail::shared_plans(nx, ny);
    }

    int nx() const { return nx_; }
    int ny() const { return ny_; }
    double Ly() const { return Ly_; }
    double dx() const { return dx_; }
    double dy() const { return dy_; }
    std::size_t size() const { return static_cast<std::size_t>(nx_) * ny_; }

    /// Number of stored wavenumbers, k = 0 .. nx/2.
    int nk() const { return nx_ / 2 + 1; }
    int nyquist() const { return nx_ / 2; }
    /// Largest wavenumber kept by the 2/3 rule: 3 * kmax < nx.
    int dealias_kmax() const { return (nx_ - 1) / 3; }

    double x(int i) const { return -std::numbers::pi + i * dx_; }
    double y(int j) const { return -Ly_ + j * dy_; }

    /// Trapezoid weights in y.
    std::span<const double> weights() const { return weights_; }

    const detail::FftPlans& fft() const { return *plans_; }

    bool same_shape(const Grid& o) const { return nx_ == o.nx_ && ny_ == o.ny_ && Ly_ == o.Ly_; }

private:
    int nx_;
    int ny_;
    double Ly_;
    double dx_ = 0.0;
    double dy_ = 0.0;
    std::vector<double> weights_;
    std::shared_ptr<const detail::FftPlans> plans_;
};

/// Real-space scalar on the grid.
class Field {
public:
    explicit Field(Grid grid) : grid_(std::move(grid)), values_(grid_.size(), 0.0) {}
    Field(Grid grid, std::vector<double> values) : grid_(std::move(grid)), values_(std::move(values)) {
        if (values_.size() != grid_.size()) {
            throw DimensionError("field has " + std::to_string(values_.size()) + " values, grid needs " +
                                 std::to_string(grid_.size()));
        }
    }

    template <class F>
    static Field from_function(const Grid& grid, F&& f) {
        Field out(grid);
        for (int j = 0; j < grid.ny(); ++j) {
            for (int i = 0; i < grid.nx(); ++i) {
                out(i, j) = f(grid.x(i), grid.y(j));
            }
        }
        return out;
    }

    const Grid& grid() const { return grid_; }
    std::span<double> values() { return values_; }
    std::span<const double> values() const { return values_; }

    double& operator()(int i, int j) { return values_[static_cast<std::size_t>(j) * grid_.nx() + i]; }
    double operator()(int i, int j) const { return values_[static_cast<std::size_t>(j) * grid_.nx() + i]; }

    bool all_finite() const {
        return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
    }

private:
    Grid grid_;
    std::vector<double> values_;
};

/// One x-wavenumber of a field: the complex y-profile f_k(y).
struct SpectralSlice {
    int k = 0;
    std::vector<Complex> profile;
};

/// Half spectrum (k = 0 .. nx/2) of a real field.
class SpectralField {
public:
    explicit SpectralField(Grid grid)
        : grid_(std::move(grid)), data_(static_cast<std::size_t>(grid_.nk()) * grid_.ny()) {}

    const Grid& grid() const { return grid_; }
    std::span<Complex> data() { return data_; }
    std::span<const Complex> data() const { return data_; }

    std::span<Complex> profile(int k) {
        return {data_.data() + static_cast<std::size_t>(k) * grid_.ny(), static_cast<std::size_t>(grid_.ny())};
    }
    std::span<const Complex> profile(int k) const {
        return {data_.data() + static_cast<std::size_t>(k) * grid_.ny(), static_cast<std::size_t>(grid_.ny())};
    }

    SpectralSlice slice(int k) const {
        auto p = profile(k);
        return {k, {p.begin(), p.end()}};
    }

private:
    Grid grid_;
    std::vector<Complex> data_;
};

inline void require_same_grid(const Grid& a, const Grid& b, const char* what) {
    if (!a.same_shape(b)) {
        throw DimensionError(std::string(what) + ": fields live on different grids");
    }
}

inline void require_finite(const Field& f, const char* what) {
    if (!f.all_finite()) {
        throw DataError(std::string(what) + ": non-finite value in field");
    }
}

/// Factor relating the FFT of samples at x_i = -pi + i dx to the x_i = i dx kernel.
inline double x_origin_phase(int k) { return (k % 2 == 0) ? 1.0 : -1.0; }

/// Wavenumber used by first x-derivatives; the Nyquist mode has none.
inline int derivative_wavenumber(const Grid& g, int k) { return k == g.nyquist() ? 0 : k; }

inline void to_spectral(const Field& f, SpectralField& out) {
    const Grid& g = f.grid();
    require_same_grid(g, out.grid(), "to_spectral");
    g.fft().forward(f.values().data(), out.data().data());
    const double scale = 1.0 / g.nx();
    for (int k = 0; k < g.nk(); ++k) {
        const double s = scale * x_origin_phase(k);
        for (auto& v : out.profile(k)) v *= s;
    }
}

inline SpectralField to_spectral(const Field& f) {
    SpectralField out(f.grid());
    to_spectral(f, out);
    return out;
}

/// Inverse transform of the modes k <= kmax only, optionally of the x-derivative.
/// `scratch` is resized as needed and overwritten.
inline void to_physical_filtered(const SpectralField& s, Field& out, std::vector<Complex>& scratch, int kmax,
                                 bool dx) {
    const Grid& g = s.grid();
    require_same_grid(g, out.grid(), "to_physical");
    const auto ny = static_cast<std::size_t>(g.ny());
    scratch.resize(s.data().size());
    for (int k = 0; k < g.nk(); ++k) {
        Complex* dst = scratch.data() + static_cast<std::size_t>(k) * ny;
        if (k > kmax) {
            std::fill(dst, dst + ny, Complex(0.0, 0.0));
            continue;
        }
        const Complex* src = s.data().data() + static_cast<std::size_t>(k) * ny;
        const double ph = x_origin_phase(k);
        if (dx) {
            const double w = ph * derivative_wavenumber(g, k);
            for (std::size_t j = 0; j < ny; ++j) dst[j] = Complex(-w * src[j].imag(), w * src[j].real());
        } else {
            for (std::size_t j = 0; j < ny; ++j) dst[j] = ph * src[j];
        }
    }
    // The k = 0 and Nyquist coefficients of a real field are real.
    for (std::size_t j = 0; j < ny; ++j) {
        scratch[j].imag(0.0);
        scratch[static_cast<std::size_t>(g.nyquist()) * ny + j].imag(0.0);
    }
    g.fft().inverse(scratch.data(), out.values().data());
}

inline void to_physical(const SpectralField& s, Field& out, std::vector<Complex>& scratch) {
    to_physical_filtered(s, out, scratch, s.grid().nyquist(), false);
}

inline Field to_physical(const SpectralField& s) {
    Field out(s.grid());
    std::vector<Complex> scratch;
    to_physical(s, out, scratch);
    return out;
}

enum class TransformDirection { forward, inverse };

/// Forward transform: slices for k = -nx/2+1 .. nx/2, in that order.
inline std::vector<SpectralSlice> transform_x(const Field& f) {
    require_finite(f, "transform_x");
    const Grid& g = f.grid();
    const SpectralField half = to_spectral(f);
    std::vector<SpectralSlice> out;
    out.reserve(static_cast<std::size_t>(g.nx()));
    for (int k = -g.nx() / 2 + 1; k <= g.nx() / 2; ++k) {
        SpectralSlice s = half.slice(std::abs(k));
        s.k = k;
        if (k < 0) {
            for (auto& v : s.profile) v = std::conj(v);
        }
        out.push_back(std::move(s));
    }
    return out;
}

/// Inverse transform of a full slice collection back to a real field.
inline Field transform_x(const std::vector<SpectralSlice>& slices, const Grid& g) {
    if (slices.size() != static_cast<std::size_t>(g.nx())) {
        throw DimensionError("transform_x(inverse): expected " + std::to_string(g.nx()) + " slices, got " +
                             std::to_string(slices.size()));
    }
    SpectralField half(g);
    for (const auto& s : slices) {
        if (s.profile.size() != static_cast<std::size_t>(g.ny())) {
            throw DimensionError("transform_x(inverse): slice profile length mismatch");
        }
        for (const auto& v : s.profile) {
            if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) {
                throw DataError("transform_x(inverse): non-finite slice value");
            }
        }
        if (s.k >= 0 && s.k <= g.nyquist()) {
            std::copy(s.profile.begin(), s.profile.end(), half.profile(s.k).begin());
        }
    }
    return to_physical(half);
}

// ---------------------------------------------------------------------------
// y finite differences on single profiles

/// First derivative: central differences inside, second-order one-sided at
/// the two walls.
template <class T>
std::vector<T> ddy_profile_first(std::span<const T> f, double dy) {
    const std::size_t n = f.size();
    std::vector<T> out(n);
    const double inv2 = 0.5 / dy;
    for (std::size_t j = 1; j + 1 < n; ++j) out[j] = (f[j + 1] - f[j - 1]) * inv2;
    out[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) * inv2;
    out[n - 1] = (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) * inv2;
    return out;
}

/// Second derivative with the no-flux closure: mirror ghost node at each wall,
/// i.e. 2 (f_1 - f_0) / dy^2. This is the operator the dynamics use; it is
/// conservative with respect to the trapezoid weights.
template <class T>
void neumann_dyy(std::span<const T> f, double dy, std::span<T> out) {
    const std::size_t n = f.size();
    const double inv = 1.0 / (dy * dy);
    for (std::size_t j = 1; j + 1 < n; ++j) out[j] = (f[j + 1] - 2.0 * f[j] + f[j - 1]) * inv;
    out[0] = 2.0 * (f[1] - f[0]) * inv;
    out[n - 1] = 2.0 * (f[n - 2] - f[n - 1]) * inv;
}

template <class T>
std::vector<T> ddy_profile(std::span<const T> f, double dy, int order) {
    if (f.size() < 5) {
        throw ConfigError("ddy needs at least 5 y nodes");
    }
    if (order == 1) return ddy_profile_first(f, dy);
    if (order == 2) {
        std::vector<T> out(f.size());
        neumann_dyy<T>(f, dy, out);
        return out;
    }
    throw DomainError("ddy order must be 1 or 2");
}

inline Field ddy(const Field& f, int order) {
    require_finite(f, "ddy");
    const Grid& g = f.grid();
    Field out(g);
    std::vector<double> col(static_cast<std::size_t>(g.ny()));
    for (int i = 0; i < g.nx(); ++i) {
        for (int j = 0; j < g.ny(); ++j) col[static_cast<std::size_t>(j)] = f(i, j);
        const auto d = ddy_profile<double>(col, g.dy(), order);
        for (int j = 0; j < g.ny(); ++j) out(i, j) = d[static_cast<std::size_t>(j)];
    }
    return out;
}

/// Spectral x-derivative: mode k times ik.
inline Field ddx(const Field& f) {
    require_finite(f, "ddx");
    const Grid& g = f.grid();
    SpectralField s = to_spectral(f);
    for (int k = 0; k < g.nk(); ++k) {
        const Complex ik(0.0, static_cast<double>(derivative_wavenumber(g, k)));
        for (auto& v : s.profile(k)) v *= ik;
    }
    return to_physical(s);
}

// ---------------------------------------------------------------------------
// Quadrature

template <class T>
T integrate_profile(std::span<const T> f, std::span<const double> w) {
    T acc{};
    for (std::size_t j = 0; j < f.size(); ++j) acc += w[j] * f[j];
    return acc;
}

/// Trapezoid inner product  sum_j w_j a_j conj(b_j).
inline Complex inner_profile(std::span<const Complex> a, std::span<const Complex> b, std::span<const double> w) {
    Complex acc{};
    for (std::size_t j = 0; j < a.size(); ++j) acc += w[j] * a[j] * std::conj(b[j]);
    return acc;
}

template <class T>
double norm2_sq_profile(std::span<const T> f, std::span<const double> w) {
    double acc = 0.0;
    for (std::size_t j = 0; j < f.size(); ++j) acc += w[j] * std::norm(f[j]);
    return acc;
}

inline double lp_norm_profile(std::span<const double> f, std::span<const double> w, double p) {
    if (std::isinf(p) && p > 0) {
        double m = 0.0;
        for (double v : f) m = std::max(m, std::abs(v));
        return m;
    }
    if (!(p >= 1.0)) throw DomainError("lp_norm requires p >= 1 or p = inf");
    double acc = 0.0;
    for (std::size_t j = 0; j < f.size(); ++j) acc += w[j] * std::pow(std::abs(f[j]), p);
    return std::pow(acc, 1.0 / p);
}

/// int int f dx dy: exact in periodic x, trapezoid in y.
inline double integrate(const Field& f) {
    require_finite(f, "integrate");
    const Grid& g = f.grid();
    const auto w = g.weights();
    double acc = 0.0;
    for (int j = 0; j < g.ny(); ++j) {
        double row = 0.0;
        for (int i = 0; i < g.nx(); ++i) row += f(i, j);
        acc += w[static_cast<std::size_t>(j)] * row;
    }
    return acc * g.dx();
}

inline double lp_norm(const Field& f, double p) {
    require_finite(f, "lp_norm");
    const Grid& g = f.grid();
    if (std::isinf(p) && p > 0) {
        double m = 0.0;
        for (double v : f.values()) m = std::max(m, std::abs(v));
        return m;
    }
    if (!(p >= 1.0)) throw DomainError("lp_norm requires p >= 1 or p = inf");
    const auto w = g.weights();
    double acc = 0.0;
    for (int j = 0; j < g.ny(); ++j) {
        double row = 0.0;
        for (int i = 0; i < g.nx(); ++i) row += std::pow(std::abs(f(i, j)), p);
        acc += w[static_cast<std::size_t>(j)] * row;
    }
    return std::pow(acc * g.dx(), 1.0 / p);
}

struct ModeSplit {
    std::vector<double> zero_mode;  // x-average, one value per y node
    Field nonzero_part;
};

inline ModeSplit mode_split(const Field& f) {
    require_finite(f, "mode_split");
    const Grid& g = f.grid();
    ModeSplit out{std::vector<double>(static_cast<std::size_t>(g.ny())), Field(g)};
    for (int j = 0; j < g.ny(); ++j) {
        double row = 0.0;
        for (int i = 0; i < g.nx(); ++i) row += f(i, j);
        const double avg = row / g.nx();
        out.zero_mode[static_cast<std::size_t>(j)] = avg;
        for (int i = 0; i < g.nx(); ++i) out.nonzero_part(i, j) = f(i, j) - avg;
    }
    return out;
}

}  // namespace pks
