#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "pks/hypocoercivity.hpp"

using namespace pks;

namespace {

oracle::Vec as_vec(std::span<const double> v) { return Eigen::Map<const oracle::Vec>(v.data(), v.size()); }

oracle::CVec as_cvec(std::span<const Complex> v) { return Eigen::Map<const oracle::CVec>(v.data(), v.size()); }

std::vector<Complex> to_std(const oracle::CVec& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

TEST(Multipliers, ReferenceValues) {
    const HypoEpsilons eps;
    const Multipliers m = multipliers(1000.0, 1, eps);
    EXPECT_NEAR(m.alpha, 1e-4, 1e-18);
    EXPECT_NEAR(m.beta, 3e-4, 1e-17);
    EXPECT_NEAR(m.gamma, 1e-2, 1e-16);
    EXPECT_LE(8 * m.beta * m.beta, m.alpha * m.gamma);
    EXPECT_NEAR(multipliers(1000.0, 2, eps).alpha, 0.01 * 1e-2 * std::pow(2.0, -2.0 / 3.0), 1e-17);
    EXPECT_NEAR(multipliers(1000.0, 2, eps).alpha, 6.30e-5, 1e-7);
    EXPECT_EQ(multipliers(1000.0, -3, eps).gamma, multipliers(1000.0, 3, eps).gamma);
}

TEST(Multipliers, Errors) {
    HypoEpsilons bad;
    bad.beta = 0.004;
    EXPECT_THROW(multipliers(1000.0, 1, bad), ConfigError);
    EXPECT_THROW(multipliers(1000.0, 0, {}), DomainError);
    EXPECT_THROW(multipliers(0.0, 1, {}), DomainError);
}

TEST(Phi, ConstantSliceUnitShear) {
    const Grid g(16, 65, 4.0);
    const auto shear = build_shear(ShearKind::couette, {}, g);
    const Multipliers m = multipliers(1000.0, 1, {});
    SpectralSlice s{1, std::vector<Complex>(65, Complex(0.7, -0.2))};
    const double norm = 8.0 * std::norm(Complex(0.7, -0.2));
    EXPECT_NEAR(phi_k(s, shear, m, g), (1 + m.gamma) * norm, 1e-13);
    EXPECT_THROW(phi_k({0, s.profile}, shear, m, g), DomainError);
}

TEST(Phi, GaussianMatchesQuadratureOracle) {
    const Grid g(16, 257, 8.0);
    const auto shear = build_shear(ShearKind::couette, {}, g);
    const Multipliers m = multipliers(1000.0, 1, {});
    SpectralSlice s{1, std::vector<Complex>(257)};
    for (int j = 0; j < 257; ++j) s.profile[j] = std::exp(-g.y(j) * g.y(j));
    const double expect = oracle::phi(as_cvec(s.profile), 1, as_vec(shear.u1), m.alpha, m.beta, m.gamma,
                                      oracle::trapezoid_weights(257, 8.0), g.dy());
    EXPECT_NEAR(phi_k(s, shear, m, g), expect, 1e-8 * expect);
}

TEST(Phi, RandomSlicesMatchOracle) {
    const Grid g(16, 129, 6.0);
    const auto shear = build_shear(ShearKind::tanh_perturbed, {0.6, {}, 1e3}, g);
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 20; ++trial) {
        const int k = 1 + trial % 5;
        const double A = std::pow(10.0, 1 + trial % 4);
        const Multipliers m = multipliers(A, k, {});
        const oracle::CVec f = oracle::random_profile(g.ny(), rng);
        const double expect = oracle::phi(f, k, as_vec(shear.u1), m.alpha, m.beta, m.gamma,
                                          oracle::trapezoid_weights(g.ny(), g.Ly()), g.dy());
        EXPECT_NEAR(phi_k({k, to_std(f)}, shear, m, g), expect, 1e-8 * std::abs(expect));
    }
}

TEST(Phi, EquivalenceAndPositivityOnRandomSlices) {
    const Grid g(16, 65, 4.0);
    const auto shear = build_shear(ShearKind::couette, {}, g);
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        const int k = 1 + trial % 7;
        const Multipliers m = multipliers(std::pow(10.0, trial % 5), k, {});
        const oracle::CVec f = oracle::random_profile(g.ny(), rng);
        const PhiTerms t = phi_k_terms(to_std(f), k, shear.u1, m, g);
        EXPECT_GE(t.total(), 0.0);
        EXPECT_GE(t.total(), 0.5 * t.mass);
        const double r = t.total() / t.equivalent();
        EXPECT_GE(r, 0.5);
        EXPECT_LE(r, 1.5);
    }
}

TEST(FunctionalF, ZeroForXIndependentState) {
    const Grid g(16, 65, 4.0);
    const auto shear = build_shear(ShearKind::couette, {}, g);
    const Field n = Field::from_function(g, [](double, double y) { return std::exp(-y * y); });
    const auto F = functional_F({0.0, n, n}, shear, {100.0, 1, std::nullopt}, {});
    EXPECT_EQ(F.total, 0.0);
}

TEST(FunctionalF, SingleModeEqualsPhiSum) {
    const Grid g(16, 129, 6.0);
    const auto shear = build_shear(ShearKind::couette, {}, g);
    const double A = 500.0;
    const Field n = Field::from_function(g, [](double x, double y) { return std::cos(x) * std::exp(-y * y); });
    const auto F = functional_F({0.0, n, Field(g)}, shear, {A, 1, std::nullopt}, {});
    // n_k = e^{-y^2} / 2 at k = +-1; the +-1 slices carry equal Phi; times 2 pi for the x-integral
    const Multipliers m = multipliers(A, 1, {});
    oracle::CVec f(g.ny());
    for (int j = 0; j < g.ny(); ++j) f(j) = 0.5 * std::exp(-g.y(j) * g.y(j));
    const double one = oracle::phi(f, 1, as_vec(shear.u1), m.alpha, m.beta, m.gamma,
                                   oracle::trapezoid_weights(g.ny(), g.Ly()), g.dy());
    EXPECT_NEAR(F.total, 2.0 * std::numbers::pi * 2.0 * one, 1e-10 * F.total);
    EXPECT_EQ(F.dyc + F.dxc + F.akc, 0.0);
}

TEST(FunctionalF, ChemicalTermTracksA) {
    const Grid g(16, 65, 4.0);
    const auto shear = build_shear(ShearKind::couette, {}, g);
    const Field c = Field::from_function(g, [](double x, double y) { return std::sin(2 * x) * std::exp(-y * y); });
    const Field n(g);
    for (double A : {50.0, 100.0}) {
        const auto F = functional_F({0.0, n, c}, shear, {A, 1, std::nullopt}, {});
        const SpectralField ch = to_spectral(c);
        const Multipliers m = multipliers(A, 2, {});
        const double direct = parseval_weight(g, 2) * A * 2 * phi_k(ch.slice(2), shear, m, g);
        EXPECT_NEAR(F.akc, direct, 1e-12 * direct);
    }
}

TEST(FunctionalF, BoundsNonzeroModeNorms) {
    const Grid g(32, 129, 6.0);
    const auto shear = build_shear(ShearKind::couette, {}, g);
    std::mt19937_64 rng(9);
    std::normal_distribution<double> nd;
    for (int trial = 0; trial < 5; ++trial) {
        const double a = nd(rng), b = nd(rng);
        const Field n = Field::from_function(g, [&](double x, double y) {
            return 1 + a * std::cos(x) * std::exp(-y * y) + b * std::sin(3 * x) * std::exp(-(y - 1) * (y - 1));
        });
        const Field c = Field::from_function(g, [&](double x, double y) { return b * std::cos(2 * x) / (1 + y * y); });
        const auto F = functional_F({0.0, n, c}, shear, {1e3, 1, std::nullopt}, {});
        // ||n_neq||^2 + ||grad c_neq||^2 with the same discrete derivatives
        const auto ns = mode_split(n), cs = mode_split(c);
        const Field cx = ddx(cs.nonzero_part), cy = ddy(cs.nonzero_part, 1);
        const double lower = std::pow(lp_norm(ns.nonzero_part, 2.0), 2) + std::pow(lp_norm(cx, 2.0), 2) +
                             std::pow(lp_norm(cy, 2.0), 2);
        EXPECT_GE(F.total, lower - 1e-8);
    }
}

TEST(Fit, ExactExponential) {
    std::vector<double> t, v;
    for (int i = 0; i < 50; ++i) {
        t.push_back(0.2 * i);
        v.push_back(3.0 * std::exp(-0.5 * t.back()));
    }
    const DecayFit f = fit_decay_rate(t, v, {0.0, 10.0});
    EXPECT_NEAR(f.rate, 0.5, 1e-10);
    EXPECT_NEAR(f.r_squared, 1.0, 1e-12);
    EXPECT_EQ(f.samples, 50u);
}

TEST(Fit, OscillatingEnvelope) {
    std::vector<double> t, v;
    for (int i = 0; i <= 400; ++i) {
        t.push_back(0.1 * i);
        v.push_back(std::exp(-0.5 * t.back()) * (2 + std::cos(t.back())));
    }
    EXPECT_NEAR(fit_decay_rate(t, v, {10.0, 30.0}).rate, 0.5, 0.05);
}

TEST(Fit, ConstantAndErrors) {
    std::vector<double> t, v;
    for (int i = 0; i < 20; ++i) {
        t.push_back(i);
        v.push_back(4.0);
    }
    EXPECT_EQ(fit_decay_rate(t, v, {0.0, 19.0}).rate, 0.0);
    EXPECT_THROW(fit_decay_rate(t, v, {0.0, 5.0}), InsufficientDataError);
    v[3] = 0.0;
    EXPECT_THROW(fit_decay_rate(t, v, {0.0, 19.0}), DomainError);
    EXPECT_THROW(fit_decay_rate(t, v, {5.0, 5.0}), DomainError);
}

TEST(ScalingSlope, PowerLaws) {
    std::vector<std::pair<double, double>> ed, heat;
    for (double A : {1e2, 1e3, 1e4}) {
        ed.emplace_back(A, std::pow(A, -1.0 / 3.0));
        heat.emplace_back(A, 1.0 / A);
    }
    EXPECT_NEAR(scaling_slope(ed), -1.0 / 3.0, 1e-12);
    EXPECT_NEAR(scaling_slope(heat), -1.0, 1e-12);
    ed.pop_back();
    EXPECT_THROW(scaling_slope(ed), InsufficientDataError);
}
