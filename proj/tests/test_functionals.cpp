#include <doctest.h>

#include <cmath>
#include <numbers>

#include "relstar/checks.hpp"
#include "relstar/functionals.hpp"
#include "relstar/minimize.hpp"

using namespace relstar;

namespace {

// Centered normalized Gaussian orbital, u(x) ~ exp(-|x|^2 / (2 sigma^2)),
// stored as weighted samples. Closed forms used below:
//   <u, sqrt(-Lap) u>   = 2 / (sigma sqrt(pi))
//   D(|u|^2, |u|^2)     = sqrt(2/pi) / sigma
//   <u, (-Lap)^{-1/2} u> = 2 sigma / sqrt(pi)
OrbitalSet gaussian_state(int n, double L, double sigma) {
    const SpectralGrid g = SpectralGrid::cubic(n, L);
    OrbitalSet s;
    s.grid = g;
    s.orbitals.resize(g.size(), 1);
    for (int x = 0; x < n; ++x)
        for (int y = 0; y < n; ++y)
            for (int z = 0; z < n; ++z) {
                const double r2 = g.coordinate(x) * g.coordinate(x) +
                                  g.coordinate(y) * g.coordinate(y) +
                                  g.coordinate(z) * g.coordinate(z);
                s.orbitals((std::ptrdiff_t(x) * n + y) * n + z, 0) =
                    std::exp(-r2 / (2.0 * sigma * sigma));
            }
    s.orbitals.col(0) /= s.orbitals.col(0).norm();
    s.occupations = Eigen::VectorXd::Ones(1);
    return s;
}

}  // namespace

TEST_CASE("gaussian closed forms for the quadratic terms") {
    const double sigma = 1.5, L = 24.0;
    const OrbitalSet s = gaussian_state(32, L, sigma);
    Fourier fft(32);
    const double rt_pi = std::sqrt(std::numbers::pi);

    const double T =
        kinetic_trace(s, MultiplierSpec::massless(), fft);
    CHECK(T == doctest::Approx(2.0 / (sigma * rt_pi)).epsilon(5e-3));

    const double D = direct_term(density(s), fft);
    CHECK(D ==
          doctest::Approx(std::sqrt(2.0 / std::numbers::pi) / sigma)
              .epsilon(5e-3));

    double bias = 0.0;
    const double inv = inverse_sqrt_trace(s, fft, &bias);
    CHECK(bias > 0.0);
    // the 1/|xi| cells next to the origin carry a first-order midpoint
    // error at this spectral resolution, hence the looser tolerance
    CHECK(inv + bias ==
          doctest::Approx(2.0 * sigma / rt_pi).epsilon(2e-2));
}

TEST_CASE("rank-one exchange cancels the direct term exactly") {
    const OrbitalSet s = gaussian_state(16, 12.0, 1.2);
    Fourier fft(16);
    const double D = direct_term(density(s), fft);
    const double X = exchange_term(s, fft);
    CHECK(std::abs(D - X) < 1e-12 * D);
    CHECK_THROWS_AS((void)gn_quotient(s, QuotientVariant::HF, fft),
                    DegenerateDenominator);
}

TEST_CASE("energy breakdown satisfies its own total identity") {
    const SpectralGrid g = SpectralGrid::cubic(12, 10.0);
    const OrbitalSet s = seed_state(g, 3, 21);
    Fourier fft(12);
    const double kappa = 0.8, mass = 1.1;

    const EnergyBreakdown e = hf_energy(s, mass, kappa, fft);
    const double total = e.kinetic -
                         0.5 * kappa * (e.direct - e.exchange) -
                         0.5 * kappa * e.pairing;
    CHECK(e.pairing == 0.0);
    CHECK(e.total == doctest::Approx(total).epsilon(1e-14));

    const QuotientValue q = gn_quotient(s, QuotientVariant::HF, fft);
    const double T0 = kinetic_trace(s, MultiplierSpec::massless(), fft);
    CHECK(q.numerator == doctest::Approx(2.0 * T0).epsilon(1e-13));
    CHECK(q.denominator ==
          doctest::Approx(e.direct - e.exchange).epsilon(1e-12));
    CHECK(q.value ==
          doctest::Approx(q.numerator / q.denominator).epsilon(1e-14));
}

TEST_CASE("relaxed quotient carries the occupation norm") {
    const SpectralGrid g = SpectralGrid::cubic(12, 10.0);
    OrbitalSet s = seed_state(g, 3, 22);
    s.occupations << 1.0, 0.6, 0.3;
    Fourier fft(12);

    const QuotientValue relaxed =
        gn_quotient(s, QuotientVariant::RelaxedRank, fft);
    const double T0 = kinetic_trace(s, MultiplierSpec::massless(), fft);
    CHECK(relaxed.numerator ==
          doctest::Approx(2.0 * T0 * 1.0).epsilon(1e-13));
    CHECK(relaxed.value > 0.0);
}

TEST_CASE("pairing term assembles the hfb denominator") {
    const SpectralGrid g = SpectralGrid::cubic(12, 10.0);
    PairingState p;
    p.frame = seed_state(g, 4, 23);
    p.pair_angles.resize(2);
    p.pair_angles << 0.7, 0.4;
    Fourier fft(12);

    const double Xa = pairing_term(p, fft);
    CHECK(Xa >= 0.0);  // integral of |alpha|^2 against a positive kernel

    OrbitalSet frame_weighted = p.frame;
    frame_weighted.occupations = p.occupations();
    const double D = direct_term(density(frame_weighted), fft);
    const double X = exchange_term(frame_weighted, fft);
    const double T0 =
        kinetic_trace(frame_weighted, MultiplierSpec::massless(), fft);

    const QuotientValue q = gn_quotient(p, fft);
    CHECK(q.numerator == doctest::Approx(2.0 * T0).epsilon(1e-13));
    CHECK(q.denominator == doctest::Approx(D - X + Xa).epsilon(1e-12));

    const EnergyBreakdown e = hfb_energy(p, 1.0, 0.9, fft);
    CHECK(e.total == doctest::Approx(e.kinetic - 0.45 * (D - X) -
                                     0.45 * Xa)
                         .epsilon(1e-12));
}

TEST_CASE("hardy-kato inequality holds on random smooth states") {
    const SpectralGrid g = SpectralGrid::cubic(16, 12.0);
    const RealField coul = build_multiplier(g, MultiplierSpec::coulomb());
    double worst = 0.0;
    CHECK(hardy_kato_violations(g, coul, 50, 17, &worst) == 0);
    CHECK(worst <= 1.0);
    CHECK(worst > 0.0);
}
