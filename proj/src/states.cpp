#include "relstar/states.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numbers>
#include <stdexcept>

namespace relstar {

double OrbitalSet::orthonormality_residual() const {
    const int N = count();
    double worst = 0.0;
    for (int j = 0; j < N; ++j) {
        for (int i = 0; i <= j; ++i) {
            Complex g = orbitals.col(i).dot(orbitals.col(j));
            const double target = (i == j) ? 1.0 : 0.0;
            worst = std::max(worst, std::abs(g - target));
        }
    }
    return worst;
}

Eigen::VectorXd PairingState::pair_occupations() const {
    Eigen::VectorXd lam(pair_angles.size());
    for (int k = 0; k < lam.size(); ++k) {
        const double s = std::sin(pair_angles[k]);
        lam[k] = s * s;
    }
    return lam;
}

Eigen::VectorXd PairingState::pair_amplitudes() const {
    Eigen::VectorXd c(pair_angles.size());
    for (int k = 0; k < c.size(); ++k)
        c[k] = std::sin(pair_angles[k]) * std::cos(pair_angles[k]);
    return c;
}

Eigen::VectorXd PairingState::occupations() const {
    const Eigen::VectorXd lam = pair_occupations();
    Eigen::VectorXd occ(2 * lam.size());
    for (int k = 0; k < lam.size(); ++k) {
        occ[2 * k] = lam[k];
        occ[2 * k + 1] = lam[k];
    }
    return occ;
}

DensityField density(const OrbitalSet& s) {
    const double inv_h3 = 1.0 / s.grid.cell_volume();
    RealField vals = RealField::Zero(s.grid.size());
    for (int j = 0; j < s.count(); ++j)
        vals += s.occupations[j] * inv_h3 * s.orbitals.col(j).cwiseAbs2();
    return DensityField{s.grid, vals, s.grid.cell_volume() * vals.sum()};
}

DensityField density(const PairingState& s) {
    OrbitalSet weighted = s.frame;
    weighted.occupations = s.occupations();
    return density(weighted);
}

Field pair_density(const OrbitalSet& s, int j, int k) {
    if (j < 0 || k < 0 || j >= s.count() || k >= s.count())
        throw std::invalid_argument("pair_density: orbital index out of range");
    const double inv_h3 = 1.0 / s.grid.cell_volume();
    return inv_h3 * s.orbitals.col(j).cwiseProduct(s.orbitals.col(k).conjugate());
}

OrbitalSet dilate(const OrbitalSet& s, double beta) {
    return OrbitalSet{s.grid.dilated(beta), s.orbitals, s.occupations};
}

PairingState dilate(const PairingState& s, double beta) {
    return PairingState{dilate(s.frame, beta), s.pair_angles};
}

void orthonormalize(Eigen::MatrixXcd& frame) {
    const Eigen::MatrixXcd gram = frame.adjoint() * frame;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(gram);
    if (es.info() != Eigen::Success)
        throw std::runtime_error("orthonormalize: Gram eigendecomposition failed");
    const Eigen::VectorXd w = es.eigenvalues();
    if (!(w.minCoeff() > 0.0) || w.maxCoeff() / w.minCoeff() > 1e12)
        throw std::runtime_error(
            "orthonormalize: Gram condition number exceeds 1e12, columns are "
            "numerically dependent");
    const Eigen::VectorXd inv_sqrt = w.cwiseSqrt().cwiseInverse();
    frame = frame * (es.eigenvectors() * inv_sqrt.asDiagonal() *
                     es.eigenvectors().adjoint());
}

namespace {
void note(Admissibility& a, double violation, const std::string& what) {
    if (violation > a.max_violation) a.max_violation = violation;
    a.ok = false;
    a.violations.push_back(what);
}
}  // namespace

Admissibility check_admissibility(const OrbitalSet& s) {
    Admissibility a;
    if (s.grid.n < 8 || s.grid.n % 2 != 0 || !(s.grid.box_length > 0.0))
        note(a, 1.0, "grid is malformed");
    if (s.orbitals.rows() != s.grid.size())
        note(a, 1.0, "orbital array length does not match the grid");
    if (s.orbitals.cols() != s.occupations.size())
        note(a, 1.0, "occupation count does not match the orbital count");
    for (int j = 0; j < s.occupations.size(); ++j) {
        const double o = s.occupations[j];
        if (!(o > 0.0) || o > 1.0 + 1e-12)
            note(a, std::abs(o - 1.0), "occupation outside (0, 1]");
    }
    if (s.orbitals.rows() == s.grid.size()) {
        const double r = s.orthonormality_residual();
        if (r > 1e-10) note(a, r, "orbitals are not orthonormal");
    }
    return a;
}

Admissibility check_bcs_saturation(const Eigen::VectorXd& lambdas,
                                   const Eigen::VectorXd& amplitudes) {
    Admissibility a;
    if (lambdas.size() != amplitudes.size()) {
        note(a, 1.0, "lambda/amplitude length mismatch");
        return a;
    }
    for (int k = 0; k < lambdas.size(); ++k) {
        const double slack = amplitudes[k] * amplitudes[k] -
                             lambdas[k] * (1.0 - lambdas[k]);
        if (slack > 1e-12)
            note(a, slack, "pairing amplitude exceeds the BCS saturation bound");
    }
    return a;
}

Admissibility check_admissibility(const PairingState& s) {
    Admissibility a;
    if (s.frame.count() % 2 != 0)
        note(a, 1.0, "pairing frame must hold an even orbital count");
    if (s.frame.count() != 2 * s.pair_count())
        note(a, 1.0, "pair angle count does not match the frame");
    for (int k = 0; k < s.pair_angles.size(); ++k) {
        const double t = s.pair_angles[k];
        if (!(t >= 0.0) || t > std::numbers::pi / 2 + 1e-12)
            note(a, std::abs(t), "pair angle outside [0, pi/2]");
    }
    if (s.frame.orbitals.rows() == s.frame.grid.size()) {
        const double r = s.frame.orthonormality_residual();
        if (r > 1e-10) note(a, r, "frame is not orthonormal");
    }
    const Admissibility sat =
        check_bcs_saturation(s.pair_occupations(), s.pair_amplitudes());
    if (!sat.ok) {
        for (const auto& v : sat.violations) a.violations.push_back(v);
        a.ok = false;
        a.max_violation = std::max(a.max_violation, sat.max_violation);
    }
    return a;
}

// ---------------------------------------------------------------------------
// checkpoint i/o

namespace {

constexpr char kMagic[4] = {'R', 'S', 'T', 'R'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::ifstream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw std::runtime_error("checkpoint: truncated file");
    return v;
}

void write_checkpoint(const std::string& path, const SpectralGrid& grid,
                      const Eigen::MatrixXcd& orbitals,
                      const Eigen::VectorXd& occupations,
                      const Eigen::VectorXd& pair_angles, double mass,
                      double coupling) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("checkpoint: cannot open " + path);
    out.write(kMagic, 4);
    put(out, kVersion);
    put(out, std::uint32_t(grid.n));
    put(out, grid.box_length);
    put(out, std::uint32_t(orbitals.cols()));
    put(out, mass);
    put(out, coupling);
    for (int j = 0; j < occupations.size(); ++j) put(out, occupations[j]);
    for (int k = 0; k < pair_angles.size(); ++k) put(out, pair_angles[k]);
    for (int j = 0; j < orbitals.cols(); ++j) {
        for (std::ptrdiff_t i = 0; i < orbitals.rows(); ++i) {
            put(out, orbitals(i, j).real());
            put(out, orbitals(i, j).imag());
        }
    }
    if (!out) throw std::runtime_error("checkpoint: write failed on " + path);
}

}  // namespace

void save_checkpoint(const std::string& path, const OrbitalSet& s, double mass,
                     double coupling) {
    write_checkpoint(path, s.grid, s.orbitals, s.occupations, Eigen::VectorXd(),
                     mass, coupling);
}

void save_checkpoint(const std::string& path, const PairingState& s, double mass,
                     double coupling) {
    write_checkpoint(path, s.frame.grid, s.frame.orbitals, s.frame.occupations,
                     s.pair_angles, mass, coupling);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
    const std::int64_t file_size = in.tellg();
    in.seekg(0);

    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("checkpoint: bad magic");
    const auto version = get<std::uint32_t>(in);
    if (version != kVersion)
        throw std::runtime_error("checkpoint: unknown version " +
                                 std::to_string(version));
    const auto n = get<std::uint32_t>(in);
    const auto box = get<double>(in);
    const auto count = get<std::uint32_t>(in);
    const auto mass = get<double>(in);
    const auto coupling = get<double>(in);

    Checkpoint cp;
    cp.grid = SpectralGrid::cubic(int(n), box);
    cp.mass = mass;
    cp.coupling = coupling;

    const std::int64_t header = 4 + 4 + 4 + 8 + 4 + 8 + 8;
    const std::int64_t orbital_bytes = std::int64_t(16) * count * cp.grid.size();
    const std::int64_t angle_bytes =
        file_size - header - 8 * std::int64_t(count) - orbital_bytes;
    if (angle_bytes < 0 || angle_bytes % 8 != 0)
        throw std::runtime_error("checkpoint: size is inconsistent with header");
    const std::int64_t K = angle_bytes / 8;
    if (K != 0 && 2 * K != count)
        throw std::runtime_error("checkpoint: pair angle count must be half the orbital count");

    cp.occupations.resize(count);
    for (std::uint32_t j = 0; j < count; ++j) cp.occupations[j] = get<double>(in);
    cp.pair_angles.resize(K);
    for (std::int64_t k = 0; k < K; ++k) cp.pair_angles[k] = get<double>(in);
    cp.orbitals.resize(cp.grid.size(), count);
    for (std::uint32_t j = 0; j < count; ++j) {
        for (std::ptrdiff_t i = 0; i < cp.grid.size(); ++i) {
            const double re = get<double>(in);
            const double im = get<double>(in);
            cp.orbitals(i, j) = Complex(re, im);
        }
    }
    return cp;
}

OrbitalSet Checkpoint::orbital_set() const {
    return OrbitalSet{grid, orbitals, occupations};
}

PairingState Checkpoint::pairing_state() const {
    if (!has_pairing())
        throw std::runtime_error("checkpoint: no pairing block present");
    return PairingState{OrbitalSet{grid, orbitals, occupations}, pair_angles};
}

}  // namespace relstar
