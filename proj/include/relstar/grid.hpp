#pragma once

#include <Eigen/Dense>

#include "relstar/fft.hpp"

namespace relstar {

// Periodic cubic grid with n points per axis and box side L.  Storage is a
// flattened n^3 vector with the x index fastest: i = x + n*(y + n*z).
// Coordinates are centered: node i along an axis sits at h*k with signed
// k in [-n/2, n/2), so the origin is a grid node.  Plane-wave frequencies
// are xi_k = 2*pi*k/L over the same signed index set; the Nyquist index
// -n/2 has no positive partner.
struct SpectralGrid {
    int n = 0;
    double box_length = 0.0;
    // dilation bookkeeping: box_length == box_base / dilation always.  Scaling
    // through the accumulated product keeps the dilation group law exact in
    // floating point: dilating by a then b lands on the same box_length bits
    // as dilating once by a*b.
    double box_base = 0.0;
    double dilation = 1.0;

    static SpectralGrid cubic(int n, double box_length);

    // same grid relabeled so that lengths shrink by beta (beta > 1 concentrates)
    SpectralGrid dilated(double beta) const;

    double spacing() const { return box_length / n; }
    double cell_volume() const {
        const double h = spacing();
        return h * h * h;
    }
    std::ptrdiff_t size() const { return std::ptrdiff_t(n) * n * n; }

    // storage index along one axis -> signed lattice index
    int signed_index(int i) const { return i < n / 2 ? i : i - n; }
    double frequency(int i) const;
    double coordinate(int i) const { return spacing() * signed_index(i); }

    // squared periodic distance from the origin for a flattened node index
    double radius2(std::ptrdiff_t flat) const;
};

enum class MultiplierKind {
    KineticMassive,       // sqrt(|xi|^2 + m^2) - m
    KineticMassless,      // |xi|
    InverseSqrtLaplacian, // 1/|xi|, zero mode dropped
    CoulombTruncated,     // 4*pi*(1 - cos(|xi| R))/|xi|^2,  2*pi*R^2 at xi = 0
    MassGap,              // m^2 / (sqrt(beta^2 |xi|^2 + m^2) + beta |xi|)
};

struct MultiplierSpec {
    MultiplierKind kind = MultiplierKind::KineticMassless;
    double mass = 0.0;      // KineticMassive (m >= 0), MassGap (m > 0)
    double radius = 0.0;    // CoulombTruncated cutoff; 0 selects the default L/2
    double dilation = 1.0;  // MassGap beta > 0

    static MultiplierSpec kinetic(double m) {
        return {MultiplierKind::KineticMassive, m, 0.0, 1.0};
    }
    static MultiplierSpec massless() { return {MultiplierKind::KineticMassless, 0.0, 0.0, 1.0}; }
    static MultiplierSpec inverse_sqrt() {
        return {MultiplierKind::InverseSqrtLaplacian, 0.0, 0.0, 1.0};
    }
    static MultiplierSpec coulomb(double R = 0.0) {
        return {MultiplierKind::CoulombTruncated, 0.0, R, 1.0};
    }
    static MultiplierSpec mass_gap(double m, double beta) {
        return {MultiplierKind::MassGap, m, 0.0, beta};
    }
};

// Diagonal Fourier table over the frequency lattice of g.  Tables are real,
// nonnegative, and symmetric under k -> -k away from the Nyquist plane.
RealField build_multiplier(const SpectralGrid& g, const MultiplierSpec& spec);

// IDFT( table .* DFT(f) ) with unitary transforms
Field apply_multiplier(const RealField& table, const Field& f, const Fourier& fft);

// Potential of a density: apply_multiplier with the truncated Coulomb table.
// Density values are physical node samples; the result is the physical
// potential, so  D(rho, rho) = h^3 * sum(rho .* convolve_coulomb(rho)).
Field convolve_coulomb(const SpectralGrid& g, const Field& rho, const Fourier& fft,
                       double radius = 0.0);
RealField convolve_coulomb(const SpectralGrid& g, const RealField& rho, const Fourier& fft,
                           double radius = 0.0);

}  // namespace relstar
