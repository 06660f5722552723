#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "relstar/functionals.hpp"
#include "relstar/minimize.hpp"

using namespace relstar;

namespace {

struct Rng {
    std::uint64_t s;
    explicit Rng(std::uint64_t seed) : s(seed) {}
    double uniform() {
        s += 0x9e3779b97f4a7c15ull;
        std::uint64_t z = s;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        z ^= z >> 31;
        return double(z >> 11) * 0x1.0p-53;
    }
    double symmetric() { return 2.0 * uniform() - 1.0; }
};

Eigen::MatrixXcd random_direction(std::ptrdiff_t rows, int cols, Rng& rng) {
    Eigen::MatrixXcd v(rows, cols);
    for (int j = 0; j < cols; ++j)
        for (std::ptrdiff_t i = 0; i < rows; ++i)
            v(i, j) = Complex(rng.symmetric(), rng.symmetric());
    v /= v.norm();
    return v;
}

// Relative mismatch between the analytic directional derivative and a
// central difference; `scale` guards the denominator for flat directions.
double fd_mismatch(double analytic, double fd, double scale) {
    const double denom =
        std::max({std::abs(analytic), std::abs(fd), 1e-10 * scale});
    return std::abs(analytic - fd) / denom;
}

double orbital_fd(const OrbitalSet& base, const Eigen::MatrixXcd& v,
                  ObjectiveKind kind, double mass, double kappa, double h) {
    OrbitalSet plus = base, minus = base;
    plus.orbitals += h * v;
    minus.orbitals -= h * v;
    return (evaluate_objective(plus, kind, mass, kappa).value -
            evaluate_objective(minus, kind, mass, kappa).value) /
           (2.0 * h);
}

double pairing_fd(const PairingState& base, const Eigen::MatrixXcd& dv,
                  const Eigen::VectorXd& dtheta, ObjectiveKind kind,
                  double mass, double kappa, double h) {
    PairingState plus = base, minus = base;
    plus.frame.orbitals += h * dv;
    minus.frame.orbitals -= h * dv;
    plus.pair_angles += h * dtheta;
    minus.pair_angles -= h * dtheta;
    return (evaluate_objective(plus, kind, mass, kappa).value -
            evaluate_objective(minus, kind, mass, kappa).value) /
           (2.0 * h);
}

}  // namespace

TEST_CASE("seed states are deterministic orthonormal frames") {
    const SpectralGrid g = SpectralGrid::cubic(8, 7.0);
    const OrbitalSet a = seed_state(g, 3, 42);
    const OrbitalSet b = seed_state(g, 3, 42);
    const OrbitalSet c = seed_state(g, 3, 43);
    CHECK(a.orbitals == b.orbitals);
    CHECK(a.orbitals != c.orbitals);
    CHECK(a.orthonormality_residual() < 1e-12);
    CHECK(a.occupations == Eigen::VectorXd::Ones(3));
}

TEST_CASE("orbital gradients match central differences") {
    const SpectralGrid g = SpectralGrid::cubic(8, 7.0);
    Rng rng(91);
    const double h = 1e-5;

    struct Case {
        ObjectiveKind kind;
        double mass, kappa;
    };
    const Case cases[] = {
        {ObjectiveKind::HFEnergy, 1.0, 0.6},
        {ObjectiveKind::QuotientHF, 0.0, 0.0},
        {ObjectiveKind::QuotientRelaxed, 0.0, 0.0},
    };
    for (const Case& cs : cases) {
        OrbitalSet s = seed_state(g, 3, 31);
        if (cs.kind == ObjectiveKind::QuotientRelaxed)
            s.occupations << 1.0, 0.62, 0.37;
        const ObjectiveEval e =
            evaluate_objective(s, cs.kind, cs.mass, cs.kappa);
        const double scale = e.orbital_gradient.norm();
        for (int t = 0; t < 5; ++t) {
            const Eigen::MatrixXcd v =
                random_direction(g.size(), 3, rng);
            const double analytic =
                2.0 * (v.conjugate().cwiseProduct(e.orbital_gradient))
                          .sum()
                          .real();
            const double fd =
                orbital_fd(s, v, cs.kind, cs.mass, cs.kappa, h);
            CHECK(fd_mismatch(analytic, fd, scale) < 1e-5);
        }
    }
}

TEST_CASE("occupation gradient of the relaxed quotient matches differences") {
    const SpectralGrid g = SpectralGrid::cubic(8, 7.0);
    OrbitalSet s = seed_state(g, 3, 77);
    s.occupations << 1.0, 0.58, 0.33;  // unique maximum, no subgradient tie
    const ObjectiveEval e =
        evaluate_objective(s, ObjectiveKind::QuotientRelaxed, 0.0, 0.0);
    REQUIRE(e.occupation_gradient.size() == 3);

    Rng rng(5);
    const double h = 1e-6;
    for (int t = 0; t < 5; ++t) {
        Eigen::VectorXd w(3);
        for (int j = 0; j < 3; ++j) w[j] = rng.symmetric();
        OrbitalSet plus = s, minus = s;
        plus.occupations += h * w;
        minus.occupations -= h * w;
        const double fd =
            (evaluate_objective(plus, ObjectiveKind::QuotientRelaxed, 0.0,
                                0.0)
                 .value -
             evaluate_objective(minus, ObjectiveKind::QuotientRelaxed, 0.0,
                                0.0)
                 .value) /
            (2.0 * h);
        const double analytic = e.occupation_gradient.dot(w);
        CHECK(fd_mismatch(analytic, fd, e.occupation_gradient.norm()) <
              1e-5);
    }
}

TEST_CASE("pairing gradients match central differences") {
    const SpectralGrid g = SpectralGrid::cubic(8, 7.0);
    Rng rng(13);
    const double h = 1e-5;

    struct Case {
        ObjectiveKind kind;
        double mass, kappa;
    };
    const Case cases[] = {
        {ObjectiveKind::HFBEnergy, 1.0, 0.8},
        {ObjectiveKind::QuotientHFB, 0.0, 0.0},
    };
    for (const Case& cs : cases) {
        PairingState p;
        p.frame = seed_state(g, 4, 61);
        p.pair_angles.resize(2);
        p.pair_angles << 0.9, 0.5;
        const ObjectiveEval e =
            evaluate_objective(p, cs.kind, cs.mass, cs.kappa);
        REQUIRE(e.angle_gradient.size() == 2);
        const double scale =
            e.orbital_gradient.norm() + e.angle_gradient.norm();
        for (int t = 0; t < 5; ++t) {
            const Eigen::MatrixXcd v = random_direction(g.size(), 4, rng);
            Eigen::VectorXd dtheta(2);
            dtheta << rng.symmetric(), rng.symmetric();
            const double analytic =
                2.0 * (v.conjugate().cwiseProduct(e.orbital_gradient))
                          .sum()
                          .real() +
                e.angle_gradient.dot(dtheta);
            const double fd =
                pairing_fd(p, v, dtheta, cs.kind, cs.mass, cs.kappa, h);
            CHECK(fd_mismatch(analytic, fd, scale) < 1e-5);
        }
    }
}

TEST_CASE("objective evaluation validates its input class") {
    const SpectralGrid g = SpectralGrid::cubic(8, 7.0);
    const OrbitalSet s = seed_state(g, 2, 3);
    CHECK_THROWS_AS(
        (void)evaluate_objective(s, ObjectiveKind::TFObjective, 0.0, 0.0),
        std::invalid_argument);
    CHECK_THROWS_AS(
        (void)evaluate_objective(s, ObjectiveKind::HFBEnergy, 1.0, 0.5),
        std::invalid_argument);
    PairingState p;
    p.frame = seed_state(g, 2, 3);
    p.pair_angles = Eigen::VectorXd::Constant(1, 0.4);
    CHECK_THROWS_AS(
        (void)evaluate_objective(p, ObjectiveKind::HFEnergy, 1.0, 0.5),
        std::invalid_argument);
}

TEST_CASE("descent reduces the quotient and re-scores through the public "
          "functionals") {
    const SpectralGrid g = SpectralGrid::cubic(12, 14.0);
    const OrbitalSet s = seed_state(g, 2, 9);
    Fourier fft(12);
    const double before = gn_quotient(s, QuotientVariant::HF, fft).value;

    MinimizeConfig cfg;
    cfg.objective = ObjectiveKind::QuotientHF;
    cfg.max_iterations = 150;
    cfg.gradient_tolerance = 1e-9;
    const MinimizeResult r = minimize(s, cfg);

    CHECK(r.objective < before);
    CHECK(r.log.front().iteration == 0);
    CHECK_FALSE(r.log.empty());
    CHECK((r.stop_reason == "tolerance" ||
           r.stop_reason == "max_iterations" ||
           r.stop_reason == "NonDecreasingStep"));

    // exact same-code-path contract with the public quotient
    Fourier fft2(12);
    const QuotientValue q =
        gn_quotient(r.state, QuotientVariant::HF, fft2);
    CHECK(r.objective == q.value);
}

TEST_CASE("kinetic renormalization is an exact relabeling") {
    const SpectralGrid g = SpectralGrid::cubic(12, 14.0);
    MinimizeConfig cfg;
    cfg.objective = ObjectiveKind::QuotientHF;
    cfg.max_iterations = 120;
    cfg.gradient_tolerance = 1e-9;
    const MinimizeResult r = minimize(seed_state(g, 2, 29), cfg);

    OrbitalSet s = r.state;
    Fourier fft(12);
    renormalize_kinetic(s, fft);
    const double T = kinetic_trace(s, MultiplierSpec::massless(), fft);
    CHECK(T == doctest::Approx(1.0).epsilon(1e-12));
    // the quotient is dilation invariant, so the score is unchanged
    const double q = gn_quotient(s, QuotientVariant::HF, fft).value;
    CHECK(q == doctest::Approx(r.objective).epsilon(1e-12));
}

TEST_CASE("pairing descent honors a fixed trace target") {
    const SpectralGrid g = SpectralGrid::cubic(8, 9.0);
    PairingState p;
    p.frame = seed_state(g, 4, 15);
    p.pair_angles.resize(2);
    p.pair_angles << 1.2, 0.3;

    MinimizeConfig cfg;
    cfg.objective = ObjectiveKind::QuotientHFB;
    cfg.max_iterations = 60;
    cfg.gradient_tolerance = 1e-10;
    const MinimizeResult r = minimize(p, cfg, 1.6);
    const PairingState out = r.pairing_state();
    CHECK(out.trace() == doctest::Approx(1.6).epsilon(1e-9));

    CHECK_THROWS_AS((void)minimize(p, cfg, 4.5),  // capacity is 2K = 4
                    std::invalid_argument);
}

TEST_CASE("solver argument validation") {
    const SpectralGrid g = SpectralGrid::cubic(8, 7.0);
    MinimizeConfig cfg;
    cfg.max_iterations = 10;

    CHECK_THROWS_AS((void)solve_kappa_n(1, g, cfg, 1),
                    std::invalid_argument);

    OrbitalSet bad = seed_state(g, 2, 1);
    bad.occupations[1] = 0.5;
    MinimizeConfig qcfg = cfg;
    qcfg.objective = ObjectiveKind::QuotientHF;
    CHECK_THROWS_AS((void)minimize(bad, qcfg), std::invalid_argument);

    // HF energy minimization is only defined on 0 < kappa < kappa_N, m > 0
    CHECK_THROWS_AS(
        (void)solve_hf_energy(2, 0.0, 0.5, 1.0, g, cfg),
        std::invalid_argument);
    CHECK_THROWS_AS(
        (void)solve_hf_energy(2, 1.0, 1.2, 1.0, g, cfg),
        std::invalid_argument);
}
