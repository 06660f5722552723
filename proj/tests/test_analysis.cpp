#include <doctest.h>

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "relstar/analysis.hpp"

using namespace relstar;

TEST_CASE("rate fit recovers an exact power law") {
    std::vector<double> x, y;
    for (double v : {1.0, 2.0, 4.0, 8.0, 16.0}) {
        x.push_back(v);
        y.push_back(3.25 * std::sqrt(v));
    }
    const RateFit f = fit_rate(x, y);
    CHECK(f.points == 5);
    CHECK(f.exponent == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(f.prefactor == doctest::Approx(3.25).epsilon(1e-12));
    CHECK(f.r_squared == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("rate fit skips rows a log cannot see") {
    const RateFit f =
        fit_rate({1.0, 0.0, 2.0, -3.0, 4.0}, {2.0, 5.0, 4.0, 5.0, 8.0});
    CHECK(f.points == 3);
    CHECK(f.exponent == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("scan tables emit round-trip csv") {
    ScanTable t;
    t.columns = {"alpha", "beta"};
    t.rows = {{1.0 / 3.0, 2.0}, {4.0, 5.0e-17}};
    const std::string csv = t.csv();

    CHECK(csv.find("alpha,beta\r\n") == 0);
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);  // header
    std::getline(in, line);
    const double back = std::stod(line.substr(0, line.find(',')));
    CHECK(back == 1.0 / 3.0);  // 17 digits round-trip exactly

    CHECK(t.column("beta") == 1);
    CHECK_THROWS_AS((void)t.column("gamma"), std::invalid_argument);
}

TEST_CASE("coupling classification against a threshold table") {
    const std::vector<ThresholdEntry> table = {
        {2, 1.5, 0.01}, {3, 1.0, 0.01}, {4, 0.8, 0.01}};

    CHECK(classify_kappa(1.2, table).max_stable == 2);
    CHECK(classify_kappa(0.9, table).max_stable == 3);
    // kappa below the smallest threshold is ambiguous (order 5 untabulated)
    CHECK(classify_kappa(0.85, table).max_stable == 3);
    CHECK(classify_kappa(1.7, table).max_stable == 1);
    CHECK(classify_kappa(1.5, table).max_stable == 1);

    const KappaClassification near = classify_kappa(0.995, table);
    CHECK(near.at_boundary);
    CHECK(near.boundary_N == 3);
    CHECK(near.margin == doctest::Approx(0.01));

    CHECK_THROWS_AS((void)classify_kappa(0.5, table), std::out_of_range);
    CHECK_THROWS_AS((void)classify_kappa(-1.0, table),
                    std::invalid_argument);
    CHECK_THROWS_AS(
        (void)classify_kappa(1.0, std::vector<ThresholdEntry>{
                                      {2, 1.0, 0.0}, {3, 1.2, 0.0}}),
        std::invalid_argument);
}

TEST_CASE("dilation trajectory satisfies the exact energy split") {
    const SpectralGrid g = SpectralGrid::cubic(12, 10.0);
    PairingState p;
    p.frame = seed_state(g, 4, 19);
    p.pair_angles.resize(2);
    p.pair_angles << 0.9, 0.55;
    const double mass = 1.0;
    // half the state's own quotient keeps the massless energy positive, so
    // the trajectory stays above -m lambda at every dilation
    Fourier qfft(12);
    const double kappa = 0.5 * gn_quotient(p, qfft).value;

    const ScanTable t =
        hfb_scaling_trajectory(p, mass, kappa, {1.0, 2.0, 4.0, 8.0});
    REQUIRE(t.rows.size() == 4);

    const int c_res = t.column("identity_residual");
    const int c_gap = t.column("gap_trace");
    const int c_energy = t.column("energy");
    const int c_plus = t.column("energy_plus_mass");
    for (const auto& row : t.rows) {
        CHECK(row[c_res] <= 1e-12);
        // B <= m pointwise, so the gap trace sits below m Tr(gamma)
        CHECK(row[c_gap] <= mass * p.trace() * (1.0 + 1e-12));
        CHECK(row[c_gap] > 0.0);
        CHECK(row[c_plus] ==
              doctest::Approx(row[c_energy] + mass * p.trace())
                  .epsilon(1e-12));
        // the nonexistence mechanism: E > -m lambda on every sample
        CHECK(row[c_plus] > 0.0);
    }

    // the beta = 1 row is the plain energy evaluation
    Fourier fft(12);
    const EnergyBreakdown e = hfb_energy(p, mass, kappa, fft);
    CHECK(t.rows[0][c_energy] ==
          doctest::Approx(e.total).epsilon(1e-13));
}

TEST_CASE("decay diagnostic reports a steep slope for a gaussian") {
    const int n = 24;
    const double L = 18.0;
    const SpectralGrid g = SpectralGrid::cubic(n, L);
    OrbitalSet s;
    s.grid = g;
    s.orbitals.resize(g.size(), 1);
    const double sigma = L / 14.0;
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

    const DecayReport d = decay_diagnostic(s);
    CHECK(d.slope < -6.0);
    CHECK(d.shells.rows.size() > 0);
    CHECK(d.window_decades > 0.0);
    CHECK(d.bound_constant > 0.0);
}

TEST_CASE("fixed-trace quotient scan shows the pairing improvement") {
    const SpectralGrid g = SpectralGrid::cubic(8, 8.0);
    MinimizeConfig cfg;
    cfg.objective = ObjectiveKind::QuotientHFB;
    cfg.max_iterations = 120;
    cfg.gradient_tolerance = 1e-8;
    cfg.seed = 3;

    const HFBQuotientScan scan = hfb_quotient_scan({1.0, 2.0}, 2, g, cfg);
    REQUIRE(scan.table.rows.size() == 2);
    const int c_hat = scan.table.column("kappa_hat");
    const int c_off = scan.table.column("kappa_pairing_off");
    for (const auto& row : scan.table.rows) {
        CHECK(row[c_hat] > 0.0);
        // removing the pairing term from the denominator raises the quotient
        CHECK(row[c_off] >= row[c_hat] * (1.0 - 1e-10));
    }

    CHECK_THROWS_AS(
        (void)hfb_quotient_scan({5.0}, 2, g, cfg),  // capacity 2K = 4
        std::invalid_argument);
}
