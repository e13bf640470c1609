#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "pks/model.hpp"

using namespace pks;

namespace {

Field random_field(const Grid& g, std::uint64_t seed, double mean = 0.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ud(-1.0, 1.0);
    Field f(g);
    for (double& v : f.values()) v = mean + ud(rng);
    return f;
}

oracle::Mat as_matrix(const Field& f) {
    const Grid& g = f.grid();
    oracle::Mat m(g.nx(), g.ny());
    for (int i = 0; i < g.nx(); ++i) {
        for (int j = 0; j < g.ny(); ++j) m(i, j) = f(i, j);
    }
    return m;
}

double max_abs(const Field& f) { return lp_norm(f, INFINITY); }

}  // namespace

TEST(Shear, NamedProfiles) {
    const Grid g(16, 33, 8.0);
    const auto c = build_shear(ShearKind::couette, {}, g);
    for (int j = 0; j < g.ny(); ++j) {
        EXPECT_EQ(c.u1[j], 1.0);
        EXPECT_EQ(c.u[j], g.y(j));
        EXPECT_EQ(c.u2[j], 0.0);
    }
    const auto t = build_shear(ShearKind::tanh_perturbed, {0.5, {}, 1e3}, g);
    EXPECT_NEAR(t.u1[16], 1.5, 1e-15);
    EXPECT_NEAR(t.u1[0], 1.0, 1e-5);
    EXPECT_THROW(build_shear(ShearKind::tanh_perturbed, {1.0, {}, 1e3}, g), ConfigError);
}

TEST(Shear, RejectsDecreasingAndUnknown) {
    const Grid g(16, 33, 8.0);
    EXPECT_THROW(build_shear(ShearKind::custom, {0.0, {0.0, -1.0}, 1e3}, g), ConfigError);
    EXPECT_THROW(build_shear(ShearKind::custom, {0.0, {}, 1e3}, g), ConfigError);
    try {
        parse_shear_kind("sine");
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("couette"), std::string::npos);
    }
    // u = y + y^3 / 10: u' = 1 + 3 y^2 / 10
    const auto p = build_shear(ShearKind::custom, {0.0, {0.0, 1.0, 0.0, 0.1}, 1e3}, g);
    EXPECT_NEAR(p.u1[0], 1.0 + 0.3 * 64, 1e-12);
    EXPECT_NEAR(p.u3[5], 0.6, 1e-12);
    EXPECT_THROW(build_shear(ShearKind::custom, {0.0, {0.0, 1.0, 0.0, 0.1}, 5.0}, g), ConfigError);
}

TEST(Chemotaxis, MatchesDenseOracleOnSmallGrid) {
    const Grid g(8, 17, 2.0);
    const Field n = random_field(g, 11, 1.0);
    const Field c = random_field(g, 12);
    const Field got = chemotaxis_flux(n, c);
    const oracle::Mat expect = oracle::chemotaxis_divergence(as_matrix(n), as_matrix(c), g.dy());
    const double scale = expect.cwiseAbs().maxCoeff();
    double err = 0.0;
    for (int i = 0; i < g.nx(); ++i) {
        for (int j = 0; j < g.ny(); ++j) err = std::max(err, std::abs(got(i, j) - expect(i, j)));
    }
    EXPECT_LE(err, 1e-10 * scale);
}

TEST(Chemotaxis, ConstantFactorsOut) {
    const Grid g(32, 65, 4.0);
    const Field c = Field::from_function(g, [](double x, double y) { return std::cos(x) * std::exp(-y * y); });
    const Field n = Field::from_function(g, [](double, double) { return 2.0; });
    // n-bar Lap c with the matching discrete operators: exact dxx, Neumann dyy
    const Field got = chemotaxis_flux(n, c);
    const Field lap = Field::from_function(g, [&](double x, double y) {
        return -2.0 * std::cos(x) * std::exp(-y * y);  // n-bar dxx c
    });
    const Field dyy = ddy(c, 2);
    double err = 0.0;
    for (int i = 0; i < g.nx(); ++i) {
        for (int j = 0; j < g.ny(); ++j) err = std::max(err, std::abs(got(i, j) - lap(i, j) - 2.0 * dyy(i, j)));
    }
    EXPECT_LE(err, 1e-10);
    EXPECT_LE(max_abs(chemotaxis_flux(random_field(g, 5, 2.0), Field::from_function(g, [](double, double) {
                  return 4.0;
              }))),
              1e-12);
}

TEST(Chemotaxis, RowsIntegrateToZero) {
    const Grid g(32, 65, 4.0);
    const Field div = chemotaxis_flux(random_field(g, 21, 2.0), random_field(g, 22));
    EXPECT_LE(std::abs(integrate(div)), 1e-12);
    // with c = c(y) there is no x-flux, so each column integrates to zero (no-flux walls)
    const Field cy = Field::from_function(g, [](double, double y) { return std::sin(y) + 0.3 * y * y; });
    const Field ydiv = chemotaxis_flux(random_field(g, 23, 2.0), cy);
    const auto w = g.weights();
    for (int i = 0; i < g.nx(); ++i) {
        double col = 0.0;
        for (int j = 0; j < g.ny(); ++j) col += w[j] * ydiv(i, j);
        EXPECT_LE(std::abs(col), 1e-11);
    }
}

TEST(Rhs, HomogeneousSteadyState) {
    const Grid g(16, 33, 4.0);
    const auto shear = build_shear(ShearKind::tanh_perturbed, {0.3, {}, 1e3}, g);
    const Field k = Field::from_function(g, [](double, double) { return 1.7; });
    const Rhs r = assemble_rhs({0.0, k, k}, shear, {10.0, 1, std::nullopt});
    EXPECT_LE(max_abs(r.dn), 1e-10);
    EXPECT_LE(max_abs(r.dc), 1e-10);
}

TEST(Rhs, XIndependentDataMatchesZeroModeEquation) {
    const Grid g(16, 65, 4.0);
    const auto shear = build_shear(ShearKind::couette, {}, g);
    const double A = 7.0;
    auto n0 = [](double y) { return 1.0 + std::exp(-y * y); };
    auto c0 = [](double y) { return std::cos(y); };
    const Field n = Field::from_function(g, [&](double, double y) { return n0(y); });
    const Field c = Field::from_function(g, [&](double, double y) { return c0(y); });
    const Rhs r = assemble_rhs({0.0, n, c}, shear, {A, 1, std::nullopt});

    oracle::Vec nv(g.ny()), cv(g.ny());
    for (int j = 0; j < g.ny(); ++j) {
        nv(j) = n0(g.y(j));
        cv(j) = c0(g.y(j));
    }
    const oracle::Mat L = oracle::neumann_laplacian(g.ny(), g.dy());
    const oracle::Vec dn = (L * nv - oracle::flux_divergence_y(nv, cv, g.dy())) / A;
    const oracle::Vec dc = (L * cv + nv - cv) / A;
    for (int i = 0; i < g.nx(); ++i) {
        for (int j = 0; j < g.ny(); ++j) {
            EXPECT_NEAR(r.dn(i, j), dn(j), 1e-10);
            EXPECT_NEAR(r.dc(i, j), dc(j), 1e-10);
        }
    }
}

TEST(Rhs, ZeroDensityLeavesLinearChemical) {
    const Grid g(16, 33, 4.0);
    const auto shear = build_shear(ShearKind::couette, {}, g);
    const double A = 3.0;
    const Field c = Field::from_function(g, [](double x, double y) { return std::sin(x) * std::exp(-y * y); });
    const Rhs r = assemble_rhs({0.0, Field(g), c}, shear, {A, 1, std::nullopt});
    EXPECT_LE(max_abs(r.dn), 1e-14);
    const Field dyy = ddy(c, 2);
    for (int i = 0; i < g.nx(); ++i) {
        for (int j = 0; j < g.ny(); ++j) {
            const double x = g.x(i), y = g.y(j);
            const double expect =
                (-c(i, j) + dyy(i, j) - c(i, j)) / A - y * std::cos(x) * std::exp(-y * y);
            EXPECT_NEAR(r.dc(i, j), expect, 1e-12);
        }
    }
}

TEST(Rhs, RowMassConservation) {
    const Grid g(32, 65, 4.0);
    const auto shear = build_shear(ShearKind::couette, {}, g);
    const Rhs r = assemble_rhs({0.0, random_field(g, 1, 2.0), random_field(g, 2)}, shear, {5.0, 1, std::nullopt});
    EXPECT_LE(std::abs(integrate(r.dn)), 1e-12);
}

TEST(Rhs, EllipticRegimeIsMisuse) {
    const Grid g(16, 33, 4.0);
    const auto shear = build_shear(ShearKind::couette, {}, g);
    EXPECT_THROW(assemble_rhs({0.0, Field(g), Field(g)}, shear, {5.0, 0, std::nullopt}), MisuseError);
}

TEST(Elliptic, TrivialCases) {
    const Grid g(16, 33, 4.0);
    EXPECT_LE(max_abs(chem_elliptic_solve(Field(g))), 0.0);
    const Field c = chem_elliptic_solve(Field::from_function(g, [](double, double) { return 2.5; }));
    for (double v : c.values()) EXPECT_NEAR(v, 2.5, 1e-10);
}

TEST(Elliptic, ResidualOfDiscreteOperator) {
    const Grid g(32, 129, 6.0);
    const Field n = random_field(g, 9, 1.0);
    const Field c = chem_elliptic_solve(n);
    const Field hc = apply_helmholtz(c);
    double r = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) r = std::max(r, std::abs(hc.values()[i] + n.values()[i]));
    EXPECT_LE(r, 1e-10 * max_abs(n));
}

TEST(Elliptic, ManufacturedSolutionSecondOrder) {
    // c* = cos(x) e^{-y^2}, Lap c* = cos(x) e^{-y^2} (4 y^2 - 3), n = c* - Lap c*
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
    EXPECT_NEAR(std::log2(e1 / e2), 2.0, 0.2);
    EXPECT_NEAR(std::log2(e2 / e3), 2.0, 0.2);
}
