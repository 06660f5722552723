#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "relstar/minimize.hpp"
#include "relstar/states.hpp"

using namespace relstar;

namespace {

OrbitalSet sample_state(int n, double L, int N, std::uint64_t seed) {
    return seed_state(SpectralGrid::cubic(n, L), N, seed);
}

}  // namespace

TEST_CASE("orthonormalization produces an orthonormal frame") {
    const OrbitalSet s = sample_state(8, 6.0, 3, 11);
    CHECK(s.orthonormality_residual() < 1e-12);

    Eigen::MatrixXcd f = s.orbitals;
    f.col(1) = 0.9 * f.col(0) + 0.1 * f.col(1);  // nearly dependent
    orthonormalize(f);
    OrbitalSet t = s;
    t.orbitals = f;
    CHECK(t.orthonormality_residual() < 1e-12);
}

TEST_CASE("density mass equals the occupation sum") {
    OrbitalSet s = sample_state(8, 6.0, 3, 4);
    s.occupations << 1.0, 0.5, 0.25;
    const DensityField rho = density(s);
    CHECK(rho.total_mass == doctest::Approx(1.75).epsilon(1e-12));
    CHECK(rho.values.minCoeff() >= 0.0);
}

TEST_CASE("dilation relabels the grid and leaves samples untouched") {
    const OrbitalSet s = sample_state(8, 6.0, 2, 5);
    const OrbitalSet d = dilate(s, 3.0);
    CHECK(d.grid.box_length == doctest::Approx(2.0));
    CHECK(d.orbitals == s.orbitals);  // bitwise
    CHECK(dilate(d, 1.0 / 3.0).grid.box_length == s.grid.box_length);
}

TEST_CASE("pairing occupations follow the angle parametrization") {
    PairingState p;
    p.frame = sample_state(8, 6.0, 4, 6);
    p.pair_angles.resize(2);
    p.pair_angles << std::asin(std::sqrt(0.25)), std::asin(std::sqrt(0.81));

    const Eigen::VectorXd lam = p.pair_occupations();
    CHECK(lam[0] == doctest::Approx(0.25).epsilon(1e-14));
    CHECK(lam[1] == doctest::Approx(0.81).epsilon(1e-14));
    // BCS-saturated amplitudes: c_k^2 = lambda_k (1 - lambda_k)
    const Eigen::VectorXd c = p.pair_amplitudes();
    CHECK(c[0] * c[0] ==
          doctest::Approx(lam[0] * (1.0 - lam[0])).epsilon(1e-14));
    const Eigen::VectorXd occ = p.occupations();
    REQUIRE(occ.size() == 4);
    CHECK(occ[0] == occ[1]);
    CHECK(occ[2] == occ[3]);
    CHECK(p.trace() == doctest::Approx(2.0 * (0.25 + 0.81)).epsilon(1e-14));
}

TEST_CASE("admissibility flags broken frames and occupations") {
    OrbitalSet s = sample_state(8, 6.0, 2, 7);
    CHECK(check_admissibility(s).ok);

    OrbitalSet bad_occ = s;
    bad_occ.occupations[0] = 1.5;
    CHECK_FALSE(check_admissibility(bad_occ).ok);

    OrbitalSet skew = s;
    skew.orbitals.col(0) *= 2.0;
    CHECK_FALSE(check_admissibility(skew).ok);
}

TEST_CASE("checkpoints round-trip bitwise") {
    const auto path =
        (std::filesystem::temp_directory_path() / "relstar_test.state")
            .string();

    SUBCASE("orbital sets") {
        OrbitalSet s = sample_state(8, 6.0, 3, 9);
        s.occupations << 1.0, 0.75, 0.5;
        save_checkpoint(path, s, 1.25, 0.8);
        const Checkpoint c = load_checkpoint(path);
        CHECK_FALSE(c.has_pairing());
        CHECK(c.mass == 1.25);
        CHECK(c.coupling == 0.8);
        const OrbitalSet r = c.orbital_set();
        CHECK(r.grid.box_length == s.grid.box_length);
        CHECK(r.orbitals == s.orbitals);
        CHECK(r.occupations == s.occupations);
    }

    SUBCASE("pairing states") {
        PairingState p;
        p.frame = sample_state(8, 6.0, 4, 10);
        p.pair_angles.resize(2);
        p.pair_angles << 0.3, 1.1;
        save_checkpoint(path, p, 2.0, 1.5);
        const Checkpoint c = load_checkpoint(path);
        REQUIRE(c.has_pairing());
        const PairingState r = c.pairing_state();
        CHECK(r.frame.orbitals == p.frame.orbitals);
        CHECK(r.pair_angles == p.pair_angles);
    }

    std::remove(path.c_str());
}
