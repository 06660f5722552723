#include <doctest.h>

#include <cmath>
#include <numbers>

#include "relstar/radial.hpp"

using namespace relstar;

TEST_CASE("radial quadrature integrates the volume element exactly") {
    const RadialGrid g = RadialGrid::logarithmic(1024, 1e-3, 50.0);
    const double vol = g.integrate(Eigen::VectorXd::Ones(g.count()));
    const double want =
        4.0 / 3.0 * std::numbers::pi * std::pow(50.0, 3);
    CHECK(vol == doctest::Approx(want).epsilon(1e-12));
    CHECK(g.radii[0] == doctest::Approx(1e-3));
    for (int i = 1; i < g.count(); ++i) CHECK(g.radii[i] > g.radii[i - 1]);
}

TEST_CASE("newton potential of a uniform ball") {
    const RadialGrid g = RadialGrid::logarithmic(4096, 1e-3, 60.0);
    const double R = 10.0;
    Eigen::VectorXd f(g.count());
    double mass = 0.0;
    for (int i = 0; i < g.count(); ++i) f[i] = g.radii[i] <= R ? 1.0 : 0.0;
    mass = g.integrate(f);

    const Eigen::VectorXd phi = newton_potential(g, f);
    // exterior: exactly mass / r at every node beyond the surface cell
    double worst = 0.0;
    for (int i = 0; i < g.count(); ++i)
        if (g.radii[i] > R * 1.01)
            worst = std::max(worst,
                             std::abs(phi[i] - mass / g.radii[i]) /
                                 (mass / g.radii[i]));
    CHECK(worst < 1e-12);
    // center: 2 pi R^2 for unit density, up to the node-snapped surface
    CHECK(phi[0] == doctest::Approx(2.0 * std::numbers::pi * R * R)
                        .epsilon(5e-3));
}

TEST_CASE("coulomb self-energy of a uniform ball") {
    const RadialGrid g = RadialGrid::logarithmic(4096, 1e-3, 60.0);
    const double R = 10.0;
    Eigen::VectorXd f(g.count());
    for (int i = 0; i < g.count(); ++i) f[i] = g.radii[i] <= R ? 1.0 : 0.0;
    // full bilinear form, no energy 1/2: (4 pi)^2 (2/15) R^5
    const double closed =
        32.0 * std::numbers::pi * std::numbers::pi / 15.0 * std::pow(R, 5);
    CHECK(radial_coulomb_energy(g, f, f) ==
          doctest::Approx(closed).epsilon(2e-2));
    Eigen::VectorXd neg = f;
    neg[0] = -1.0;
    CHECK_THROWS_AS((void)radial_coulomb_energy(g, neg, f),
                    std::invalid_argument);
}

TEST_CASE("fermi gas constant from the free spectrum") {
    // independent path: energy density p_F^4 / (8 pi^2) at unit density
    const double pf = std::cbrt(6.0 * std::numbers::pi * std::numbers::pi);
    const double want =
        std::pow(pf, 4) / (8.0 * std::numbers::pi * std::numbers::pi);
    CHECK(fermi_gas_constant() == doctest::Approx(want).epsilon(1e-14));
}

TEST_CASE("semiclassical objective gradient matches central differences") {
    const RadialGrid g = RadialGrid::logarithmic(256, 1e-2, 80.0);
    Eigen::VectorXd f(g.count());
    for (int i = 0; i < g.count(); ++i)
        f[i] = std::exp(-g.radii[i] * g.radii[i] / 9.0) + 1e-8;

    const double base = tf_objective(g, f);
    CHECK(base > 0.0);
    const Eigen::VectorXd grad = tf_gradient(g, f);

    std::uint64_t s = 77;
    auto next = [&s] {
        s += 0x9e3779b97f4a7c15ull;
        std::uint64_t z = s;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        z ^= z >> 31;
        return 2.0 * (double(z >> 11) * 0x1.0p-53) - 1.0;
    };
    const double h = 1e-6;
    for (int t = 0; t < 5; ++t) {
        // multiplicative perturbation keeps the profile positive
        Eigen::VectorXd w(g.count());
        for (int i = 0; i < g.count(); ++i) w[i] = f[i] * next();
        const double fd =
            (tf_objective(g, f + h * w) - tf_objective(g, f - h * w)) /
            (2.0 * h);
        const double analytic = grad.dot(w);
        const double denom = std::max(
            {std::abs(analytic), std::abs(fd), 1e-10 * grad.norm()});
        CHECK(std::abs(analytic - fd) / denom < 1e-5);
    }
}

TEST_CASE("objective is invariant under amplitude scaling and dilation") {
    const RadialGrid g = RadialGrid::logarithmic(512, 1e-3, 100.0);
    Eigen::VectorXd f(g.count());
    for (int i = 0; i < g.count(); ++i)
        f[i] = 1.0 / std::pow(1.0 + g.radii[i] * g.radii[i], 4);

    const double base = tf_objective(g, f);
    CHECK(tf_objective(g, Eigen::VectorXd(3.7 * f)) ==
          doctest::Approx(base).epsilon(1e-12));

    // dilation: relabel radii, same samples
    RadialGrid gd = g;
    gd.radii *= 2.0;
    gd.weights *= 8.0;
    CHECK(tf_objective(gd, f) == doctest::Approx(base).epsilon(1e-12));

    CHECK_THROWS_AS((void)tf_objective(g, Eigen::VectorXd::Zero(g.count())),
                    std::invalid_argument);
}

TEST_CASE("semiclassical solve lands near the cited constant") {
    MinimizeConfig cfg;
    cfg.objective = ObjectiveKind::TFObjective;
    cfg.max_iterations = 4000;
    cfg.gradient_tolerance = 3e-4;
    const TFResult r = solve_tf(cfg, 512, false);
    CHECK(r.converged);
    CHECK(r.value > 2.5);
    CHECK(r.value < 2.9);
    CHECK(r.tail_monotone);
    CHECK(r.minimizer.minCoeff() >= 0.0);
    // the two scale freedoms are fixed exactly
    const double mass = r.grid.integrate(r.minimizer);
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("scaling check tabulates deviations against the constant") {
    ScalingCheck c = chandrasekhar_scaling_check(
        {{2, 4.5}, {3, 2.9}, {4, 2.2}, {5, 1.85}}, 2.677);
    REQUIRE(c.rows.size() == 4);
    CHECK_FALSE(c.inconclusive);
    CHECK(c.rows[0].product == doctest::Approx(std::pow(4.5, 1.5) * 2.0));
    ScalingCheck tiny =
        chandrasekhar_scaling_check({{2, 4.5}, {3, 2.9}}, 2.677);
    CHECK(tiny.inconclusive);
}
