#include "relstar/checks.hpp"

#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <vector>

#include "relstar/functionals.hpp"
#include "relstar/minimize.hpp"
#include "relstar/radial.hpp"

namespace relstar {

namespace {

struct SplitMix64 {
    std::uint64_t s;
    explicit SplitMix64(std::uint64_t seed) : s(seed) {}
    std::uint64_t next() {
        std::uint64_t z = (s += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }
    double uniform() {
        return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53;
    }
    double normal() {
        const double u = uniform(), v = uniform();
        return std::sqrt(-2.0 * std::log(u)) *
               std::cos(2.0 * std::numbers::pi * v);
    }
};

std::string fmt(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6e", x);
    return buf;
}

// Random band-limited state: Gaussian spectral envelope with random phases,
// transformed to real space and l2-normalized.
Field smooth_field(const SpectralGrid& g, Fourier& fft, SplitMix64& rng,
                   double sigma) {
    const RealField xi = build_multiplier(g, MultiplierSpec::massless());
    Field spectral(g.size());
    for (std::ptrdiff_t i = 0; i < g.size(); ++i) {
        const double env = std::exp(-0.5 * sigma * sigma * xi[i] * xi[i]);
        spectral[i] = Complex(rng.normal(), rng.normal()) * env;
    }
    Field u = fft.backward(spectral);
    u /= u.norm();
    return u;
}

OrbitalSet smooth_state(const SpectralGrid& g, Fourier& fft, SplitMix64& rng,
                        int N, bool unit_occ) {
    OrbitalSet s;
    s.grid = g;
    s.orbitals.resize(g.size(), N);
    const double base = g.box_length / 10.0;
    for (int j = 0; j < N; ++j)
        s.orbitals.col(j) =
            smooth_field(g, fft, rng, base * (0.5 + rng.uniform()));
    orthonormalize(s.orbitals);
    s.occupations.resize(N);
    for (int j = 0; j < N; ++j)
        s.occupations[j] = unit_occ ? 1.0 : 0.2 + 0.8 * rng.uniform();
    return s;
}

// Lattice kernel of the truncated Coulomb table: the potential of a unit
// point charge at the origin node, k(x) with D = h^6 sum rho k rho.
RealField lattice_kernel(const SpectralGrid& g, const RealField& table,
                         Fourier& fft) {
    Field delta = Field::Zero(g.size());
    delta[0] = Complex(1.0 / g.cell_volume(), 0.0);
    return apply_multiplier(table, delta, fft).real();
}

// Explicit unitary DFT, no FFT library involved: the oracle transform.
Field dense_dft(const SpectralGrid& g, const Field& u) {
    const int n = g.n;
    std::vector<Complex> tw(n);
    for (int a = 0; a < n; ++a) {
        const double ph = -2.0 * std::numbers::pi * a / n;
        tw[a] = Complex(std::cos(ph), std::sin(ph));
    }
    Field out(g.size());
    for (int kz = 0; kz < n; ++kz)
        for (int ky = 0; ky < n; ++ky)
            for (int kx = 0; kx < n; ++kx) {
                Complex acc(0.0, 0.0);
                for (int z = 0; z < n; ++z)
                    for (int y = 0; y < n; ++y) {
                        const Complex tyz =
                            tw[(ky * y + kz * z) % n];
                        const std::ptrdiff_t row =
                            std::ptrdiff_t(n) * (y + std::ptrdiff_t(n) * z);
                        for (int x = 0; x < n; ++x)
                            acc += u[row + x] * tyz * tw[(kx * x) % n];
                    }
                out[kx + std::ptrdiff_t(n) * (ky + std::ptrdiff_t(n) * kz)] =
                    acc;
            }
    out /= std::pow(static_cast<double>(n), 1.5);
    return out;
}

int wrap_diff(int a, int b, int n) {
    int d = a - b;
    d %= n;
    if (d < 0) d += n;
    return d;
}

// Dense double-sum quadratics over the lattice kernel; O(n^6).
double dense_direct(const SpectralGrid& g, const RealField& rho_w,
                    const RealField& k) {
    const int n = g.n;
    double acc = 0.0;
    for (int z1 = 0; z1 < n; ++z1)
        for (int y1 = 0; y1 < n; ++y1)
            for (int x1 = 0; x1 < n; ++x1) {
                const std::ptrdiff_t i =
                    x1 + std::ptrdiff_t(n) * (y1 + std::ptrdiff_t(n) * z1);
                if (rho_w[i] == 0.0) continue;
                for (int z2 = 0; z2 < n; ++z2)
                    for (int y2 = 0; y2 < n; ++y2)
                        for (int x2 = 0; x2 < n; ++x2) {
                            const std::ptrdiff_t j =
                                x2 + std::ptrdiff_t(n) *
                                         (y2 + std::ptrdiff_t(n) * z2);
                            const std::ptrdiff_t kd =
                                wrap_diff(x1, x2, n) +
                                std::ptrdiff_t(n) *
                                    (wrap_diff(y1, y2, n) +
                                     std::ptrdiff_t(n) *
                                         wrap_diff(z1, z2, n));
                            acc += rho_w[i] * k[kd] * rho_w[j];
                        }
            }
    return acc;
}

double dense_kernel_form(const SpectralGrid& g, const Eigen::MatrixXcd& kern,
                         const RealField& k) {
    // sum_{x,y} |kern(x,y)|^2 k(x-y) with kern built from weighted samples
    const int n = g.n;
    double acc = 0.0;
    for (int z1 = 0; z1 < n; ++z1)
        for (int y1 = 0; y1 < n; ++y1)
            for (int x1 = 0; x1 < n; ++x1) {
                const std::ptrdiff_t i =
                    x1 + std::ptrdiff_t(n) * (y1 + std::ptrdiff_t(n) * z1);
                for (int z2 = 0; z2 < n; ++z2)
                    for (int y2 = 0; y2 < n; ++y2)
                        for (int x2 = 0; x2 < n; ++x2) {
                            const std::ptrdiff_t j =
                                x2 + std::ptrdiff_t(n) *
                                         (y2 + std::ptrdiff_t(n) * z2);
                            const std::ptrdiff_t kd =
                                wrap_diff(x1, x2, n) +
                                std::ptrdiff_t(n) *
                                    (wrap_diff(y1, y2, n) +
                                     std::ptrdiff_t(n) *
                                         wrap_diff(z1, z2, n));
                            acc += std::norm(kern(i, j)) * k[kd];
                        }
            }
    return acc;
}

double rel_err(double got, double want) {
    return std::abs(got - want) / std::max(std::abs(want), 1e-300);
}

using Suite = std::vector<CheckResult>;

void add(Suite& s, const std::string& name, bool pass,
         const std::string& detail) {
    s.push_back({name, pass, detail});
}

void check_fft(Suite& out) {
    const SpectralGrid g = SpectralGrid::cubic(16, 11.0);
    Fourier fft(16);
    SplitMix64 rng(11);
    Field u(g.size());
    for (std::ptrdiff_t i = 0; i < g.size(); ++i)
        u[i] = Complex(rng.normal(), rng.normal());
    const Field uh = fft.forward(u);
    const Field back = fft.backward(uh);
    const double round = (back - u).cwiseAbs().maxCoeff() /
                         u.cwiseAbs().maxCoeff();
    const double pars = std::abs(uh.squaredNorm() - u.squaredNorm()) /
                        u.squaredNorm();
    add(out, "fft-round-trip", round <= 1e-13, fmt(round));
    add(out, "fft-parseval", pars <= 1e-13, fmt(pars));
}

void check_multiplier_tables(Suite& out) {
    const SpectralGrid g = SpectralGrid::cubic(16, 11.0);
    const double m = 0.8, beta = 5.0;
    const RealField massless = build_multiplier(g, MultiplierSpec::massless());
    const RealField massive =
        build_multiplier(g, MultiplierSpec::kinetic(m));
    const RealField coul = build_multiplier(g, MultiplierSpec::coulomb());
    const RealField inv =
        build_multiplier(g, MultiplierSpec::inverse_sqrt());
    const RealField gap =
        build_multiplier(g, MultiplierSpec::mass_gap(m, beta));

    const double R = g.box_length / 2.0;
    bool zeros = massless[0] == 0.0 && massive[0] == 0.0 && inv[0] == 0.0 &&
                 gap[0] == m &&
                 rel_err(coul[0], 2.0 * std::numbers::pi * R * R) <= 1e-14;
    add(out, "multiplier-zero-modes", zeros,
        "massless/massive/invsqrt 0, gap m, coulomb 2 pi R^2");

    // symmetry under k -> -k and the closed forms at a sample mode
    double worst = 0.0;
    const int n = g.n;
    auto at = [&](const RealField& t, int kx, int ky, int kz) {
        auto idx = [&](int k) { return k < 0 ? k + n : k; };
        return t[idx(kx) +
                 std::ptrdiff_t(n) * (idx(ky) + std::ptrdiff_t(n) * idx(kz))];
    };
    for (const RealField* t : {&massless, &massive, &coul, &inv, &gap})
        for (int kx = 1; kx < 4; ++kx)
            for (int ky = 1; ky < 4; ++ky)
                worst = std::max(
                    worst, rel_err(at(*t, kx, ky, 2), at(*t, -kx, -ky, -2)));
    add(out, "multiplier-parity", worst <= 1e-15, fmt(worst));

    const double xi1 = 2.0 * std::numbers::pi / g.box_length;
    double closed = 0.0;
    closed = std::max(closed, rel_err(at(massless, 1, 0, 0), xi1));
    closed = std::max(
        closed, rel_err(at(massive, 1, 0, 0),
                        std::sqrt(xi1 * xi1 + m * m) - m));
    closed = std::max(
        closed,
        rel_err(at(coul, 1, 0, 0), 4.0 * std::numbers::pi *
                                       (1.0 - std::cos(xi1 * R)) /
                                       (xi1 * xi1)));
    closed = std::max(closed, rel_err(at(inv, 1, 0, 0), 1.0 / xi1));
    closed = std::max(
        closed,
        rel_err(at(gap, 1, 0, 0),
                m * m / (std::sqrt(beta * beta * xi1 * xi1 + m * m) +
                         beta * xi1)));
    add(out, "multiplier-closed-forms", closed <= 1e-14, fmt(closed));
}

void check_dilation(Suite& out) {
    const SpectralGrid g = SpectralGrid::cubic(12, 9.0);
    const SpectralGrid two = g.dilated(1.7).dilated(2.3);
    const SpectralGrid one = g.dilated(1.7 * 2.3);
    add(out, "dilation-group-law",
        two.box_length == one.box_length && two.dilation == one.dilation,
        "box_length bitwise equal through split and joint relabels");

    Fourier fft(12);
    SplitMix64 rng(5);
    OrbitalSet s = smooth_state(g, fft, rng, 2, true);
    const double q0 = gn_quotient(s, QuotientVariant::HF, fft).value;
    const double q1 =
        gn_quotient(dilate(s, 3.7), QuotientVariant::HF, fft).value;
    const double drift = rel_err(q1, q0);
    add(out, "dilation-quotient-invariance", drift <= 1e-12, fmt(drift));
}

void check_states(Suite& out) {
    const SpectralGrid g = SpectralGrid::cubic(12, 9.0);
    Fourier fft(12);
    SplitMix64 rng(7);
    OrbitalSet s = smooth_state(g, fft, rng, 3, false);
    add(out, "orthonormal-residual",
        s.orthonormality_residual() <= 1e-12,
        fmt(s.orthonormality_residual()));

    OrbitalSet bad = s;
    bad.occupations[0] = 1.5;
    bad.orbitals.col(1) = bad.orbitals.col(2);
    const Admissibility a = check_admissibility(bad);
    add(out, "admissibility-detects-violations",
        !a.ok && a.violations.size() >= 2,
        std::to_string(a.violations.size()) + " violations reported");

    const std::string path =
        (std::filesystem::temp_directory_path() / "relstar_check.state")
            .string();
    save_checkpoint(path, s, 0.3, 0.9);
    const Checkpoint c = load_checkpoint(path);
    const bool same = c.orbitals == s.orbitals &&
                      c.occupations == s.occupations &&
                      c.grid.box_length == s.grid.box_length &&
                      c.mass == 0.3 && c.coupling == 0.9;
    std::filesystem::remove(path);
    add(out, "checkpoint-round-trip", same, "bitwise state round trip");
}

void check_hardy_kato(Suite& out) {
    const SpectralGrid g = SpectralGrid::cubic(32, 20.0);
    const RealField coul = build_multiplier(g, MultiplierSpec::coulomb());
    double worst = 0.0;
    const int bad = hardy_kato_violations(g, coul, 200, 101, &worst);
    add(out, "hardy-kato-200", bad == 0,
        "worst ratio " + fmt(worst) + " of pi/2 bound");

    // Corruption fixture: a centered Gaussian saturates about 2/pi of the
    // bound, so tripling the kernel must push it over; the same probe under
    // the honest table must stay under.
    Fourier fft(g.n);
    Field bump(g.size());
    const double sigma = g.box_length / 15.0;
    for (std::ptrdiff_t i = 0; i < g.size(); ++i)
        bump[i] = std::exp(-g.radius2(i) / (2.0 * sigma * sigma));
    bump /= bump.norm();
    const RealField massless = build_multiplier(g, MultiplierSpec::massless());
    const Field bh = fft.forward(bump);
    const double rhs = std::numbers::pi / 2.0 *
                       (bh.array().abs2() * massless.array()).sum();
    const RealField kern = lattice_kernel(g, coul, fft);
    const double lhs = (bump.array().abs2() * kern.array()).sum();
    add(out, "hardy-kato-catches-corruption",
        lhs <= rhs && 3.0 * lhs > rhs,
        "bump ratio " + fmt(lhs / rhs) + ", tripled kernel violates");
}

void check_oracles(Suite& out) {
    const SpectralGrid g = SpectralGrid::cubic(8, 7.0);
    Fourier fft(8);
    SplitMix64 rng(23);
    const RealField coul = build_multiplier(g, MultiplierSpec::coulomb());
    const RealField massless = build_multiplier(g, MultiplierSpec::massless());
    const RealField massive =
        build_multiplier(g, MultiplierSpec::kinetic(0.7));
    const RealField kern = lattice_kernel(g, coul, fft);

    double wk = 0.0, wd = 0.0, wx = 0.0, wp = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        OrbitalSet s = smooth_state(g, fft, rng, 2, false);

        double t0 = 0.0, tm = 0.0;
        for (int j = 0; j < 2; ++j) {
            const Field uh = dense_dft(g, s.orbitals.col(j));
            t0 += s.occupations[j] *
                  (uh.array().abs2() * massless.array()).sum();
            tm += s.occupations[j] *
                  (uh.array().abs2() * massive.array()).sum();
        }
        wk = std::max(wk, rel_err(kinetic_trace(
                              s, MultiplierSpec::massless(), fft), t0));
        wk = std::max(
            wk, rel_err(kinetic_trace(s, MultiplierSpec::kinetic(0.7), fft),
                        tm));

        RealField rho_w = RealField::Zero(g.size());
        for (int j = 0; j < 2; ++j)
            rho_w += s.occupations[j] *
                     s.orbitals.col(j).array().abs2().matrix();
        wd = std::max(wd, rel_err(direct_term(density(s), fft),
                                  dense_direct(g, rho_w, kern)));

        Eigen::MatrixXcd gamma =
            s.orbitals.col(0) * s.occupations[0] *
                s.orbitals.col(0).adjoint() +
            s.orbitals.col(1) * s.occupations[1] *
                s.orbitals.col(1).adjoint();
        wx = std::max(wx, rel_err(exchange_term(s, fft),
                                  dense_kernel_form(g, gamma, kern)));

        PairingState p;
        p.frame = smooth_state(g, fft, rng, 4, true);
        p.pair_angles = Eigen::VectorXd(2);
        p.pair_angles << 0.4 + 0.5 * rng.uniform(), 0.3 + 0.6 * rng.uniform();
        const Eigen::VectorXd c = p.pair_amplitudes();
        Eigen::MatrixXcd alpha =
            Eigen::MatrixXcd::Zero(g.size(), g.size());
        for (int k = 0; k < 2; ++k) {
            const auto a = p.frame.orbitals.col(2 * k);
            const auto b = p.frame.orbitals.col(2 * k + 1);
            alpha += c[k] * (a * b.transpose() - b * a.transpose());
        }
        wp = std::max(wp, rel_err(pairing_term(p, fft),
                                  dense_kernel_form(g, alpha, kern)));
    }
    add(out, "oracle-kinetic", wk <= 1e-10, fmt(wk));
    add(out, "oracle-direct", wd <= 1e-10, fmt(wd));
    add(out, "oracle-exchange", wx <= 1e-10, fmt(wx));
    add(out, "oracle-pairing", wp <= 1e-10, fmt(wp));
}

void check_breakdowns(Suite& out) {
    const SpectralGrid g = SpectralGrid::cubic(12, 9.0);
    Fourier fft(12);
    SplitMix64 rng(31);
    double worst = 0.0;
    for (int trial = 0; trial < 5; ++trial) {
        OrbitalSet s = smooth_state(g, fft, rng, 2, false);
        const EnergyBreakdown e = hf_energy(s, 0.4, 0.8, fft);
        worst = std::max(
            worst,
            rel_err(e.total, e.kinetic - 0.4 * (e.direct - e.exchange)));
        PairingState p;
        p.frame = smooth_state(g, fft, rng, 4, true);
        p.pair_angles = Eigen::VectorXd::Constant(2, 0.6);
        const EnergyBreakdown b = hfb_energy(p, 0.4, 0.8, fft);
        worst = std::max(
            worst, rel_err(b.total, b.kinetic -
                                        0.4 * (b.direct - b.exchange) -
                                        0.4 * b.pairing));
    }
    add(out, "energy-breakdown-identity", worst <= 1e-12, fmt(worst));

    // rank-1 gamma: the denominator vanishes identically
    SplitMix64 rng2(37);
    OrbitalSet one = smooth_state(g, fft, rng2, 1, true);
    bool threw = false;
    try {
        gn_quotient(one, QuotientVariant::HF, fft);
    } catch (const DegenerateDenominator&) {
        threw = true;
    }
    add(out, "rank-one-cancellation", threw,
        "HF quotient rejects rank-1 states");

    double bias = 0.0;
    OrbitalSet s = smooth_state(g, fft, rng2, 2, false);
    const double raw = inverse_sqrt_trace(s, fft, &bias);
    double zw = 0.0;
    for (int j = 0; j < 2; ++j) {
        const Field uh = fft.forward(Field(s.orbitals.col(j)));
        zw += s.occupations[j] * std::norm(uh[0]);
    }
    const double hxi = 2.0 * std::numbers::pi / g.box_length;
    const double wantbias = zw * kZeroCellMean / hxi;
    add(out, "zero-mode-bias-formula",
        raw > 0.0 && rel_err(bias, wantbias) <= 1e-13, fmt(rel_err(bias, wantbias)));
}

void check_radial(Suite& out) {
    RadialGrid g = RadialGrid::logarithmic(4096, 1e-3, 40.0);
    const double vol = g.weights.sum();
    const double rmax = g.radii[g.count() - 1];
    const double want =
        4.0 / 3.0 * std::numbers::pi * rmax * rmax * rmax;
    add(out, "radial-weight-volume", rel_err(vol, want) <= 1e-13,
        fmt(rel_err(vol, want)));

    // uniform ball, radius snapped to a node: the full bilinear form has
    // the closed value (32 pi^2 / 15) R^5 for unit density
    int cut = 0;
    for (int i = 0; i < g.count(); ++i)
        if (g.radii[i] <= 20.0) cut = i;
    const double R = g.radii[cut];
    RealField f = RealField::Zero(g.count());
    for (int i = 0; i <= cut; ++i) f[i] = 1.0;
    const double energy = radial_coulomb_energy(g, f, f);
    const double closed =
        32.0 * std::numbers::pi * std::numbers::pi / 15.0 * std::pow(R, 5);
    // the hat basis ramps the ball edge over one cell; at this node count
    // that shifts the effective radius by ~0.1%, hence ~0.7% in R^5
    add(out, "radial-ball-energy", rel_err(energy, closed) <= 2e-2,
        fmt(rel_err(energy, closed)));

    // outside a compact charge the potential is mass / r, with the mass
    // measured by the same quadrature that built the potential
    const RealField phi = newton_potential(g, f);
    double worst = 0.0;
    const double mass = g.integrate(f);
    for (int i = cut + 2; i < g.count(); i += 50)
        worst = std::max(worst, rel_err(phi[i], mass / g.radii[i]));
    add(out, "radial-newton-exterior", worst <= 1e-12, fmt(worst));
}

}  // namespace

int hardy_kato_violations(const SpectralGrid& grid,
                          const RealField& coulomb_table, int count,
                          std::uint64_t seed, double* worst_ratio) {
    Fourier fft(grid.n);
    const RealField massless =
        build_multiplier(grid, MultiplierSpec::massless());
    const RealField kern = lattice_kernel(grid, coulomb_table, fft);
    SplitMix64 rng(seed);
    int bad = 0;
    double worst = 0.0;
    for (int t = 0; t < count; ++t) {
        const Field u =
            smooth_field(grid, fft, rng,
                         grid.box_length / 10.0 * (0.3 + 1.7 * rng.uniform()));
        const double lhs = (u.array().abs2() * kern.array()).sum();
        const Field uh = fft.forward(u);
        const double rhs = std::numbers::pi / 2.0 *
                           (uh.array().abs2() * massless.array()).sum();
        const double ratio = lhs / rhs;
        worst = std::max(worst, ratio);
        if (lhs > rhs * (1.0 + 1e-10)) ++bad;
    }
    if (worst_ratio) *worst_ratio = worst;
    return bad;
}

std::vector<CheckResult> run_check_suite() {
    Suite out;
    check_fft(out);
    check_multiplier_tables(out);
    check_dilation(out);
    check_states(out);
    check_hardy_kato(out);
    check_oracles(out);
    check_breakdowns(out);
    check_radial(out);
    return out;
}

}  // namespace relstar
