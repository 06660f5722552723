#include "relstar/functionals.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace relstar {

namespace {

void require_same_grid(const SpectralGrid& a, const SpectralGrid& b) {
    if (a.n != b.n || a.box_length != b.box_length)
        throw std::invalid_argument("fields live on different grids");
}

// D(rho_a, rho_b) in spectral form h^3 sum_k M_k conj(a_hat) b_hat; the real
// part is taken once at the end, so the bilinear form is symmetric to
// round-off.
double direct_spectral(const SpectralGrid& grid, const RealField& a,
                       const RealField& b, const RealField& table,
                       Fourier& fft) {
    Field fa = fft.forward(a.cast<Complex>());
    Field fb = (&a == &b) ? fa : fft.forward(b.cast<Complex>());
    const Complex acc = (fa.conjugate().array() * fb.array() *
                         table.cast<Complex>().array())
                            .sum();
    return grid.cell_volume() * acc.real();
}

// sum_j<=k weighted spectral pair energies; the shared core behind both
// exchange_term and the HFB gamma exchange.
double exchange_core(const SpectralGrid& grid, const Eigen::MatrixXcd& orbitals,
                     const Eigen::VectorXd& occ, const RealField& table,
                     Fourier& fft) {
    const double h3 = grid.cell_volume();
    const int N = static_cast<int>(orbitals.cols());
    double acc = 0.0, comp = 0.0;  // Kahan
    Field pair(orbitals.rows());
    for (int j = 0; j < N; ++j) {
        for (int k = j; k < N; ++k) {
            pair = orbitals.col(j).cwiseProduct(orbitals.col(k).conjugate()) /
                   h3;
            Field ph = fft.forward(pair);
            const double c =
                h3 * (ph.array().abs2() * table.array()).sum();
            const double w = (j == k ? 1.0 : 2.0) * occ[j] * occ[k];
            const double term = w * c - comp;
            const double next = acc + term;
            comp = (next - acc) - term;
            acc = next;
        }
    }
    return acc;
}

double kinetic_core(const SpectralGrid& grid, const Eigen::MatrixXcd& orbitals,
                    const Eigen::VectorXd& occ, const MultiplierSpec& kind,
                    Fourier& fft) {
    const RealField table = build_multiplier(grid, kind);
    double acc = 0.0, comp = 0.0;
    for (int j = 0; j < orbitals.cols(); ++j) {
        Field uh = fft.forward(orbitals.col(j));
        const double term =
            occ[j] * (uh.array().abs2() * table.array()).sum() - comp;
        const double next = acc + term;
        comp = (next - acc) - term;
        acc = next;
    }
    return acc;
}

void require_admissible(const PairingState& state) {
    const Admissibility a = check_admissibility(state);
    if (!a.ok)
        throw std::invalid_argument("inadmissible pairing state: " +
                                    (a.violations.empty()
                                         ? std::string("constraint violated")
                                         : a.violations.front()));
}

double degenerate_tolerance(double numerator) {
    return 1e-12 * std::max(std::abs(numerator), 1e-30);
}

}  // namespace

Field pair_potential(const SpectralGrid& grid,
                     const Eigen::Ref<const Eigen::VectorXcd>& a,
                     const Eigen::Ref<const Eigen::VectorXcd>& b,
                     const RealField& coulomb_table, Fourier& fft) {
    Field p = a.cwiseProduct(b.conjugate()) / grid.cell_volume();
    return apply_multiplier(coulomb_table, p, fft);
}

double kinetic_trace(const OrbitalSet& state, const MultiplierSpec& kind,
                     Fourier& fft) {
    return kinetic_core(state.grid, state.orbitals, state.occupations, kind,
                        fft);
}

double kinetic_trace(const PairingState& state, const MultiplierSpec& kind,
                     Fourier& fft) {
    return kinetic_core(state.frame.grid, state.frame.orbitals,
                        state.occupations(), kind,
                        fft);
}

double direct_term(const DensityField& a, const DensityField& b, Fourier& fft,
                   double radius) {
    require_same_grid(a.grid, b.grid);
    const RealField table =
        build_multiplier(a.grid, MultiplierSpec::coulomb(radius));
    return direct_spectral(a.grid, a.values, b.values, table, fft);
}

double direct_term(const DensityField& rho, Fourier& fft, double radius) {
    const RealField table =
        build_multiplier(rho.grid, MultiplierSpec::coulomb(radius));
    return direct_spectral(rho.grid, rho.values, rho.values, table, fft);
}

double exchange_term(const OrbitalSet& state, Fourier& fft, double radius) {
    const RealField table =
        build_multiplier(state.grid, MultiplierSpec::coulomb(radius));
    return exchange_core(state.grid, state.orbitals, state.occupations, table,
                         fft);
}

double pairing_term(const PairingState& state, Fourier& fft, double radius) {
    require_admissible(state);
    const SpectralGrid& grid = state.frame.grid;
    const double h3 = grid.cell_volume();
    const RealField table =
        build_multiplier(grid, MultiplierSpec::coulomb(radius));
    const Eigen::VectorXd c = state.pair_amplitudes();
    const int K = static_cast<int>(c.size());

    // X(alpha) = 2 sum_{k,l} c_k c_l [C(s^{a_k a_l}, s^{b_k b_l})
    //                                 - C(s^{a_k b_l}, s^{b_k a_l})]
    // with s^{fg} = f conj(g) (physical) and C(p,q) = h^3 sum p (K*q),
    // bilinear without conjugation. The (l,k) term is the conjugate of the
    // (k,l) term, so only k <= l is evaluated.
    auto orb = [&](int pair, int slot) {
        return state.frame.orbitals.col(2 * pair + slot);
    };
    auto sprod = [&](const Eigen::Ref<const Eigen::VectorXcd>& f,
                     const Eigen::Ref<const Eigen::VectorXcd>& g) -> Field {
        return f.cwiseProduct(g.conjugate()) / h3;
    };
    auto contract = [&](const Field& p,
                        const Eigen::Ref<const Eigen::VectorXcd>& qf,
                        const Eigen::Ref<const Eigen::VectorXcd>& qg) {
        Field phi = pair_potential(grid, qf, qg, table, fft);
        return h3 * (p.array() * phi.array()).sum();
    };

    double acc = 0.0, comp = 0.0;
    for (int k = 0; k < K; ++k) {
        for (int l = k; l < K; ++l) {
            const Field s_aa = sprod(orb(k, 0), orb(l, 0));
            const Field s_ab = sprod(orb(k, 0), orb(l, 1));
            const Complex hartree = contract(s_aa, orb(k, 1), orb(l, 1));
            const Complex fock = contract(s_ab, orb(k, 1), orb(l, 0));
            const double weight = (k == l ? 2.0 : 4.0) * c[k] * c[l];
            const double term =
                weight * (hartree.real() - fock.real()) - comp;
            const double next = acc + term;
            comp = (next - acc) - term;
            acc = next;
        }
    }
    return acc;
}

EnergyBreakdown hf_energy(const OrbitalSet& state, double mass, double kappa,
                          Fourier& fft, double radius) {
    if (!(kappa > 0.0)) throw std::invalid_argument("coupling must be > 0");
    if (!(mass >= 0.0)) throw std::invalid_argument("mass must be >= 0");
    EnergyBreakdown out;
    out.coupling = kappa;
    out.mass = mass;
    out.kinetic = kinetic_trace(state, MultiplierSpec::kinetic(mass), fft);
    const DensityField rho = density(state);
    out.direct = direct_term(rho, fft, radius);
    out.exchange = exchange_term(state, fft, radius);
    out.pairing = 0.0;
    out.total = out.kinetic - 0.5 * kappa * (out.direct - out.exchange);
    return out;
}

EnergyBreakdown hfb_energy(const PairingState& state, double mass,
                           double kappa, Fourier& fft, double radius) {
    if (!(kappa > 0.0)) throw std::invalid_argument("coupling must be > 0");
    if (!(mass >= 0.0)) throw std::invalid_argument("mass must be >= 0");
    require_admissible(state);
    EnergyBreakdown out;
    out.coupling = kappa;
    out.mass = mass;
    out.kinetic = kinetic_trace(state, MultiplierSpec::kinetic(mass), fft);
    const DensityField rho = density(state);
    out.direct = direct_term(rho, fft, radius);
    const RealField table =
        build_multiplier(state.frame.grid, MultiplierSpec::coulomb(radius));
    out.exchange = exchange_core(state.frame.grid, state.frame.orbitals,
                                 state.occupations(), table, fft);
    out.pairing = pairing_term(state, fft, radius);
    out.total = out.kinetic - 0.5 * kappa * (out.direct - out.exchange) -
                0.5 * kappa * out.pairing;
    return out;
}

double reduced_energy(const OrbitalSet& state, double kappa, Fourier& fft) {
    constexpr double hardy_kato = 4.0 / std::numbers::pi;
    if (!(kappa > 0.0 && kappa < hardy_kato))
        throw std::invalid_argument(
            "reduced functional requires coupling in (0, 4/pi)");
    const double t = kinetic_trace(state, MultiplierSpec::massless(), fft);
    const double d = direct_term(density(state), fft);
    return t - 0.5 * kappa * d;
}

QuotientValue gn_quotient(const OrbitalSet& state, QuotientVariant variant,
                          Fourier& fft) {
    if (variant == QuotientVariant::HFB)
        throw std::invalid_argument(
            "HFB quotient needs a PairingState; use the overload");
    const Admissibility adm = check_admissibility(state);
    if (!adm.ok)
        throw std::invalid_argument("inadmissible state: " +
                                    (adm.violations.empty()
                                         ? std::string("constraint violated")
                                         : adm.violations.front()));
    if (variant == QuotientVariant::HF) {
        for (int j = 0; j < state.count(); ++j)
            if (std::abs(state.occupations[j] - 1.0) > 1e-12)
                throw std::invalid_argument(
                    "HF quotient is over projections: occupations must be 1");
    }
    QuotientValue q;
    q.variant = variant;
    const double t = kinetic_trace(state, MultiplierSpec::massless(), fft);
    const double norm = (variant == QuotientVariant::RelaxedRank)
                            ? state.occupations.maxCoeff()
                            : 1.0;
    q.numerator = 2.0 * norm * t;
    const double d = direct_term(density(state), fft);
    const double x = exchange_term(state, fft);
    q.denominator = d - x;
    if (q.denominator <= degenerate_tolerance(q.numerator))
        throw DegenerateDenominator(
            "trial state carries no net attraction: D - X vanished");
    q.value = q.numerator / q.denominator;
    return q;
}

QuotientValue gn_quotient(const PairingState& state, Fourier& fft) {
    require_admissible(state);
    QuotientValue q;
    q.variant = QuotientVariant::HFB;
    q.numerator =
        2.0 * kinetic_trace(state, MultiplierSpec::massless(), fft);
    const double d = direct_term(density(state), fft);
    const RealField table =
        build_multiplier(state.frame.grid, MultiplierSpec::coulomb());
    const double x = exchange_core(state.frame.grid, state.frame.orbitals,
                                   state.occupations(), table, fft);
    const double xa = pairing_term(state, fft);
    q.denominator = d - x + xa;
    if (q.denominator <= degenerate_tolerance(q.numerator))
        throw DegenerateDenominator(
            "trial state carries no net attraction: D - X + X(alpha) "
            "vanished");
    q.value = q.numerator / q.denominator;
    return q;
}

double inverse_sqrt_trace(const OrbitalSet& state, Fourier& fft,
                          double* bias) {
    const RealField table =
        build_multiplier(state.grid, MultiplierSpec::inverse_sqrt());
    double acc = 0.0, zero_weight = 0.0;
    for (int j = 0; j < state.count(); ++j) {
        Field uh = fft.forward(state.orbitals.col(j));
        acc += state.occupations[j] * (uh.array().abs2() * table.array()).sum();
        zero_weight += state.occupations[j] * std::norm(uh[0]);
    }
    if (bias) {
        const double h_xi = 2.0 * std::numbers::pi / state.grid.box_length;
        *bias = zero_weight * kZeroCellMean / h_xi;
    }
    return acc;
}

}  // namespace relstar
