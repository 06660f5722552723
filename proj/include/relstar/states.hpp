#pragma once

#include <string>
#include <vector>

#include "relstar/grid.hpp"

namespace relstar {

// Finite-rank one-body density matrix gamma = sum_j occ_j |u_j><u_j|.
// Orbital columns hold weighted samples u_phys(x_i) * h^(3/2), so plain l2
// inner products of columns are physical L2 inner products and the columns
// of an admissible set are orthonormal.  Under dilation the arrays are
// untouched and only the grid is relabeled.
struct OrbitalSet {
    SpectralGrid grid;
    Eigen::MatrixXcd orbitals;    // size() x N
    Eigen::VectorXd occupations;  // N entries in (0, 1]

    int count() const { return int(orbitals.cols()); }
    double trace() const { return occupations.sum(); }
    // max_{i<=j} |<u_i,u_j> - delta_ij|
    double orthonormality_residual() const;
};

// BCS-type quasi-free state over an orthonormal frame of 2K orbitals.
// Pair k couples columns 2k and 2k+1 with occupation lambda_k = sin^2(theta_k)
// on both members and pairing amplitude c_k = sin(theta_k) cos(theta_k), which
// saturates c_k^2 = lambda_k (1 - lambda_k).  The frame's own occupations are
// all 1; effective gamma occupations come from the angles.
struct PairingState {
    OrbitalSet frame;              // 2K columns
    Eigen::VectorXd pair_angles;   // K angles in [0, pi/2]

    int pair_count() const { return int(pair_angles.size()); }
    Eigen::VectorXd pair_occupations() const;   // lambda_k
    Eigen::VectorXd pair_amplitudes() const;    // c_k
    Eigen::VectorXd occupations() const;        // lambda duplicated per member, 2K entries
    double trace() const { return 2.0 * pair_occupations().sum(); }
};

struct DensityField {
    SpectralGrid grid;
    RealField values;   // physical node samples, nonnegative
    double total_mass;  // h^3 * sum(values), equals the occupation sum exactly
};

DensityField density(const OrbitalSet& s);
DensityField density(const PairingState& s);

// physical overlap density u_j conj(u_k) / h^3;  pair_density(s, j, j).real()
// is orbital j's contribution to the density before occupation weighting
Field pair_density(const OrbitalSet& s, int j, int k);

// Grid relabeling: arrays unchanged, box shrunk by beta.  Exact group law,
// preserves orthonormality, occupations, and traces bit for bit.
OrbitalSet dilate(const OrbitalSet& s, double beta);
PairingState dilate(const PairingState& s, double beta);

// Symmetric (Loewdin) orthonormalization of the columns in place: the result
// is the closest orthonormal frame in Frobenius norm.  Throws if the Gram
// matrix condition number exceeds 1e12 (numerically dependent columns).
void orthonormalize(Eigen::MatrixXcd& frame);

struct Admissibility {
    bool ok = true;
    double max_violation = 0.0;
    std::vector<std::string> violations;
};

Admissibility check_admissibility(const OrbitalSet& s);
Admissibility check_admissibility(const PairingState& s);
// saturation check on explicit occupation/amplitude vectors (c_k^2 must not
// exceed lambda_k (1 - lambda_k) beyond round-off)
Admissibility check_bcs_saturation(const Eigen::VectorXd& lambdas,
                                   const Eigen::VectorXd& amplitudes);

// Binary checkpoint, little-endian: magic "RSTR", version u32, grid n u32,
// box_length f64, orbital count u32, mass f64, coupling f64, occupations
// f64 x N, pair_angles f64 x K (K = 0 for pure HF states), then N orbital
// arrays as interleaved re,im f64 pairs in row-major x-fastest order.
// Readers reject unknown versions and malformed sizes.
struct Checkpoint {
    SpectralGrid grid;
    Eigen::MatrixXcd orbitals;
    Eigen::VectorXd occupations;
    Eigen::VectorXd pair_angles;  // empty for HF
    double mass = 0.0;
    double coupling = 0.0;

    bool has_pairing() const { return pair_angles.size() > 0; }
    OrbitalSet orbital_set() const;
    PairingState pairing_state() const;  // requires has_pairing()
};

void save_checkpoint(const std::string& path, const OrbitalSet& s, double mass,
                     double coupling);
void save_checkpoint(const std::string& path, const PairingState& s, double mass,
                     double coupling);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace relstar
