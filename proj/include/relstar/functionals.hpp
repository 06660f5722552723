#pragma once

#include <stdexcept>

#include "relstar/fft.hpp"
#include "relstar/grid.hpp"
#include "relstar/states.hpp"

namespace relstar {

// Scalar functionals of orbital and pairing states: kinetic traces, the
// direct term D, exchange terms X(gamma) and X(alpha), HF/HFB/reduced
// energies, the three concentration quotients, and the inverse-sqrt trace.
//
// Conventions (shared with the minimizer, which reuses pair_potential):
//   orbitals store weighted samples u_phys(x_i) h^{3/2}; densities and
//   potentials store physical node values; spectral sums carry no grid
//   factors because the DFT is unitary.

struct EnergyBreakdown {
    double kinetic = 0.0;   // Tr(T gamma) for the requested kinetic multiplier
    double direct = 0.0;    // D(rho, rho)
    double exchange = 0.0;  // X(gamma)
    double pairing = 0.0;   // X(alpha); zero for pure HF
    double total = 0.0;     // kinetic - (k/2)(direct - exchange) - (k/2) pairing
    double coupling = 0.0;
    double mass = 0.0;
};

enum class QuotientVariant { HF, RelaxedRank, HFB };

struct QuotientValue {
    double numerator = 0.0;    // 2 Tr(sqrt(-Lap) gamma), times ||gamma|| if relaxed
    double denominator = 0.0;  // D - X(gamma) [+ X(alpha)]
    double value = 0.0;
    QuotientVariant variant = QuotientVariant::HF;
};

// Trial state carries no net attraction: D - X (+X(alpha)) vanished to
// round-off, as it must for every rank-1 gamma.
struct DegenerateDenominator : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Coulomb-convolved pair density: K * (a conj(b) / h^3), physical node
// values. Every direct/exchange/pairing contraction below is built from
// this one primitive so all paths share the same quadrature.
Field pair_potential(const SpectralGrid& grid,
                     const Eigen::Ref<const Eigen::VectorXcd>& a,
                     const Eigen::Ref<const Eigen::VectorXcd>& b,
                     const RealField& coulomb_table, Fourier& fft);

// Sum_j occ_j <u_j, M u_j> for a spectral multiplier M. Nonnegative for the
// kinetic kinds; additive over orbitals.
double kinetic_trace(const OrbitalSet& state, const MultiplierSpec& kind,
                     Fourier& fft);
double kinetic_trace(const PairingState& state, const MultiplierSpec& kind,
                     Fourier& fft);

// D(rho_a, rho_b) = integral of rho_a times the truncated Coulomb potential
// of rho_b. Symmetric bilinear; truncation radius 0 selects the L/2 default.
double direct_term(const DensityField& a, const DensityField& b, Fourier& fft,
                   double radius = 0.0);
double direct_term(const DensityField& rho, Fourier& fft, double radius = 0.0);

// X(gamma) via pair-density convolutions, N(N+1)/2 of them. 0 <= X <= D.
double exchange_term(const OrbitalSet& state, Fourier& fft,
                     double radius = 0.0);

// X(alpha) for the antisymmetric BCS pair kernel
//   alpha(x,y) = sum_k c_k (a_k(x) b_k(y) - b_k(x) a_k(y)),
// expanded over the K pairs into products of two Coulomb contractions; no
// six-dimensional object is ever formed.
double pairing_term(const PairingState& state, Fourier& fft,
                    double radius = 0.0);

EnergyBreakdown hf_energy(const OrbitalSet& state, double mass, double kappa,
                          Fourier& fft, double radius = 0.0);

EnergyBreakdown hfb_energy(const PairingState& state, double mass,
                           double kappa, Fourier& fft, double radius = 0.0);

// Kinetic (massless) minus (kappa/2) D; no exchange. Requires
// kappa in (0, 4/pi), the window where the functional is bounded below.
double reduced_energy(const OrbitalSet& state, double kappa, Fourier& fft);

// HF / relaxed-rank quotient of an orbital state. HF requires unit
// occupations; the relaxed numerator carries ||gamma|| = max occupation.
// Throws DegenerateDenominator when D - X <= 1e-12 x numerator scale.
QuotientValue gn_quotient(const OrbitalSet& state, QuotientVariant variant,
                          Fourier& fft);

// HFB quotient 2 Tr(sqrt(-Lap) gamma) / (D - X(gamma) + X(alpha)).
QuotientValue gn_quotient(const PairingState& state, Fourier& fft);

// Sum_j occ_j sum_{k != 0} |u_hat_j(k)|^2 / |xi_k|, the zero mode dropped.
// If bias is non-null it receives the dropped cell's contribution estimated
// with the exact cell mean of 1/|xi|, sum_j occ_j |u_hat_j(0)|^2 c0 / h_xi;
// raw value plus bias is the defensible estimate of the continuum trace.
double inverse_sqrt_trace(const OrbitalSet& state, Fourier& fft,
                          double* bias = nullptr);

// Mean of 1/|xi| over the centered unit cube, used for the zero-cell bias.
inline constexpr double kZeroCellMean = 2.380077363979553;

}  // namespace relstar
