#include "relstar/grid.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace relstar {

namespace {
constexpr double kPi = std::numbers::pi;
}

SpectralGrid SpectralGrid::cubic(int n, double box_length) {
    if (n < 8 || n % 2 != 0)
        throw std::invalid_argument("SpectralGrid: n must be even and >= 8");
    if (!(box_length > 0.0) || !std::isfinite(box_length))
        throw std::invalid_argument("SpectralGrid: box_length must be positive and finite");
    return SpectralGrid{n, box_length, box_length, 1.0};
}

SpectralGrid SpectralGrid::dilated(double beta) const {
    if (!(beta > 0.0) || !std::isfinite(beta))
        throw std::invalid_argument("SpectralGrid: dilation factor must be positive and finite");
    SpectralGrid out = *this;
    out.dilation = dilation * beta;
    out.box_length = box_base / out.dilation;
    if (!(out.box_length > 0.0) || !std::isfinite(out.box_length))
        throw std::invalid_argument("SpectralGrid: dilation overflows the box length");
    return out;
}

double SpectralGrid::frequency(int i) const {
    return 2.0 * kPi * signed_index(i) / box_length;
}

double SpectralGrid::radius2(std::ptrdiff_t flat) const {
    const int x = int(flat % n);
    const int y = int((flat / n) % n);
    const int z = int(flat / (std::ptrdiff_t(n) * n));
    const double h = spacing();
    const double cx = h * signed_index(x);
    const double cy = h * signed_index(y);
    const double cz = h * signed_index(z);
    return cx * cx + cy * cy + cz * cz;
}

RealField build_multiplier(const SpectralGrid& g, const MultiplierSpec& spec) {
    const int n = g.n;
    const double two_pi_over_L = 2.0 * kPi / g.box_length;

    double R = spec.radius;
    switch (spec.kind) {
        case MultiplierKind::KineticMassive:
            if (spec.mass < 0.0) throw std::invalid_argument("multiplier: mass must be >= 0");
            break;
        case MultiplierKind::MassGap:
            if (!(spec.mass > 0.0)) throw std::invalid_argument("multiplier: mass must be > 0");
            if (!(spec.dilation > 0.0))
                throw std::invalid_argument("multiplier: dilation must be > 0");
            break;
        case MultiplierKind::CoulombTruncated:
            if (R == 0.0) R = 0.5 * g.box_length;
            if (!(R > 0.0) || R > 0.5 * g.box_length + 1e-12 * g.box_length)
                throw std::invalid_argument("multiplier: cutoff must lie in (0, L/2]");
            break;
        default:
            break;
    }
    // cutoff as a fraction of L/2; exactly 1.0 for the default, which makes
    // the cosine phase pi*|k| independent of the box size
    const double q = (spec.kind == MultiplierKind::CoulombTruncated) ? R / (0.5 * g.box_length) : 0.0;

    RealField table(g.size());
    std::ptrdiff_t idx = 0;
    for (int z = 0; z < n; ++z) {
        const double kz = g.signed_index(z);
        for (int y = 0; y < n; ++y) {
            const double ky = g.signed_index(y);
            for (int x = 0; x < n; ++x, ++idx) {
                const double kx = g.signed_index(x);
                const double k2 = kx * kx + ky * ky + kz * kz;
                const double kabs = std::sqrt(k2);
                const double xi = two_pi_over_L * kabs;
                double v = 0.0;
                switch (spec.kind) {
                    case MultiplierKind::KineticMassive:
                        // cancellation-free; exactly zero at the zero mode
                        v = (k2 == 0.0)
                                ? 0.0
                                : xi * xi /
                                      (std::sqrt(xi * xi +
                                                 spec.mass * spec.mass) +
                                       spec.mass);
                        break;
                    case MultiplierKind::KineticMassless:
                        v = xi;
                        break;
                    case MultiplierKind::InverseSqrtLaplacian:
                        v = (k2 == 0.0) ? 0.0 : 1.0 / xi;
                        break;
                    case MultiplierKind::CoulombTruncated:
                        if (k2 == 0.0) {
                            v = 2.0 * kPi * R * R;
                        } else {
                            v = 4.0 * kPi * (1.0 - std::cos(kPi * kabs * q)) / (xi * xi);
                        }
                        break;
                    case MultiplierKind::MassGap: {
                        // exactly m at the zero mode
                        const double t = spec.dilation * xi;
                        v = (k2 == 0.0)
                                ? spec.mass
                                : spec.mass * spec.mass /
                                      (std::sqrt(t * t + spec.mass * spec.mass) +
                                       t);
                        break;
                    }
                }
                table[idx] = v;
            }
        }
    }
    return table;
}

Field apply_multiplier(const RealField& table, const Field& f, const Fourier& fft) {
    if (table.size() != f.size() || f.size() != fft.size())
        throw std::invalid_argument("apply_multiplier: size mismatch");
    Field hat = fft.forward(f);
    hat.array() *= table.array();
    return fft.backward(hat);
}

Field convolve_coulomb(const SpectralGrid& g, const Field& rho, const Fourier& fft,
                       double radius) {
    return apply_multiplier(build_multiplier(g, MultiplierSpec::coulomb(radius)), rho, fft);
}

RealField convolve_coulomb(const SpectralGrid& g, const RealField& rho, const Fourier& fft,
                           double radius) {
    Field c = convolve_coulomb(g, Field(rho.cast<Complex>()), fft, radius);
    return c.real();
}

}  // namespace relstar
