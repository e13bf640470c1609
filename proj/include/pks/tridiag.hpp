#pragma once

#include <cmath>
#include <complex>
#include <span>
#include <string>
#include <vector>

#include "pks/errors.hpp"

namespace pks {

namespace detail {
inline double reciprocal(double v) { return 1.0 / v; }
inline std::complex<double> reciprocal(std::complex<double> v) {
    const double s = 1.0 / (v.real() * v.real() + v.imag() * v.imag());
    return {v.real() * s, -v.imag() * s};
}

// Plain products without the C99 Annex G inf/nan recovery of operator*.
inline double mul(double a, double b) { return a * b; }
inline std::complex<double> mul(double a, std::complex<double> b) { return a * b; }
inline std::complex<double> mul(std::complex<double> a, std::complex<double> b) {
    return {a.real() * b.real() - a.imag() * b.imag(), a.real() * b.imag() + a.imag() * b.real()};
}
}  // namespace detail

/// LU factors of a tridiagonal matrix (Thomas algorithm, no pivoting), reusable
/// across right-hand sides. Rows:  lower[j] x[j-1] + diag[j] x[j] + upper[j] x[j+1].
template <class Coef>
class TridiagonalFactor {
public:
    TridiagonalFactor() = default;

    void factor(std::span<const Coef> lower, std::span<const Coef> diag, std::span<const Coef> upper) {
        const std::size_t n = diag.size();
        lower_.assign(lower.begin(), lower.end());
        inv_pivot_.resize(n);
        upper_mod_.resize(n);
        Coef prev{};
        for (std::size_t j = 0; j < n; ++j) {
            const Coef pivot = j == 0 ? diag[0] : diag[j] - lower[j] * prev;
            const double mag = std::abs(pivot);
            if (!(mag > 0.0) || !std::isfinite(mag)) {
                throw InternalError("tridiagonal breakdown at row " + std::to_string(j));
            }
            inv_pivot_[j] = detail::reciprocal(pivot);
            prev = (j + 1 < n) ? upper[j] * inv_pivot_[j] : Coef{};
            upper_mod_[j] = prev;
        }
    }

    template <class T>
    void solve(std::span<T> rhs) const {
        const std::size_t n = inv_pivot_.size();
        using detail::mul;
        rhs[0] = mul(inv_pivot_[0], rhs[0]);
        for (std::size_t j = 1; j < n; ++j) rhs[j] = mul(inv_pivot_[j], rhs[j] - mul(lower_[j], rhs[j - 1]));
        for (std::size_t j = n - 1; j-- > 0;) rhs[j] -= mul(upper_mod_[j], rhs[j + 1]);
    }

    std::size_t size() const { return inv_pivot_.size(); }
    Coef lower(std::size_t j) const { return lower_[j]; }
    Coef inv_pivot(std::size_t j) const { return inv_pivot_[j]; }
    Coef upper_mod(std::size_t j) const { return upper_mod_[j]; }

private:
    std::vector<Coef> lower_;
    std::vector<Coef> inv_pivot_;
    std::vector<Coef> upper_mod_;
};

/// A family of independent tridiagonal systems of one size, solved together.
/// Right-hand sides are stored system-major: rhs[s * n + j]. Coefficients are
/// kept row-major across systems so the inner loop runs over independent
/// systems.
template <class Coef>
class BatchedTridiagonal {
public:
    void assign(const std::vector<TridiagonalFactor<Coef>>& systems, std::size_t n) {
        m_ = systems.size();
        n_ = n;
        lower_.resize(m_ * n_);
        inv_pivot_.resize(m_ * n_);
        upper_mod_.resize(m_ * n_);
        for (std::size_t s = 0; s < m_; ++s) {
            if (systems[s].size() != n_) throw DimensionError("batched tridiagonal: size mismatch");
            for (std::size_t j = 0; j < n_; ++j) {
                lower_[j * m_ + s] = systems[s].lower(j);
                inv_pivot_[j * m_ + s] = systems[s].inv_pivot(j);
                upper_mod_[j * m_ + s] = systems[s].upper_mod(j);
            }
        }
    }

    template <class T>
    void solve(std::span<T> rhs) const {
        if (rhs.size() != m_ * n_) throw DimensionError("batched tridiagonal: rhs size mismatch");
        using detail::mul;
        T* x = rhs.data();
        for (std::size_t s = 0; s < m_; ++s) x[s * n_] = mul(inv_pivot_[s], x[s * n_]);
        for (std::size_t j = 1; j < n_; ++j) {
            const Coef* lo = lower_.data() + j * m_;
            const Coef* ip = inv_pivot_.data() + j * m_;
            for (std::size_t s = 0; s < m_; ++s) {
                T* r = x + s * n_ + j;
                *r = mul(ip[s], *r - mul(lo[s], *(r - 1)));
            }
        }
        for (std::size_t j = n_ - 1; j-- > 0;) {
            const Coef* up = upper_mod_.data() + j * m_;
            for (std::size_t s = 0; s < m_; ++s) {
                T* r = x + s * n_ + j;
                *r -= mul(up[s], *(r + 1));
            }
        }
    }

private:
    std::size_t m_ = 0;
    std::size_t n_ = 0;
    std::vector<Coef> lower_;
    std::vector<Coef> inv_pivot_;
    std::vector<Coef> upper_mod_;
};

/// One-shot solve; the solution overwrites rhs.
template <class T, class Coef>
void solve_tridiagonal(std::span<const Coef> lower, std::span<const Coef> diag, std::span<const Coef> upper,
                       std::span<T> rhs) {
    TridiagonalFactor<Coef> f;
    f.factor(lower, diag, upper);
    f.solve(rhs);
}

}  // namespace pks
