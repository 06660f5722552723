#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "relstar/functionals.hpp"
#include "relstar/states.hpp"

namespace relstar {

// Riemannian projected gradient descent over orthonormal frames (plus pair
// angles and occupations where the objective has them), with Armijo
// backtracking, Loewdin retraction, and per-iteration renormalization to
// Tr(sqrt(-Lap) gamma) = 1 for the scale-invariant quotient objectives.

enum class ObjectiveKind {
    HFEnergy,
    HFBEnergy,
    QuotientHF,
    QuotientRelaxed,
    QuotientHFB,
    TFObjective
};

enum class BoxAdaptation { Off, Virial };

struct MinimizeConfig {
    int max_iterations = 5000;
    double gradient_tolerance = 1e-6;  // relative to current objective scale
    double initial_step = 1.0;         // Armijo: factor 0.5, constant 1e-4
    BoxAdaptation box_adaptation = BoxAdaptation::Virial;
    std::uint64_t seed = 1;
    ObjectiveKind objective = ObjectiveKind::QuotientHF;
    double mass = 0.0;
    double kappa = 0.0;
    int threads = 1;
    // Iterations between appended log records; first and last always logged.
    int log_stride = 1;
};

struct IterateRecord {
    int iteration = 0;
    double objective = 0.0;
    double gradient_norm = 0.0;
    double step = 0.0;
};

struct MinimizeResult {
    OrbitalSet state;              // converged frame with occupations
    Eigen::VectorXd pair_angles;   // empty unless an HFB objective
    double objective = 0.0;
    double gradient_norm = 0.0;
    int iterations = 0;
    bool converged = false;
    std::string stop_reason;       // "tolerance", "max_iterations",
                                   // "NonDecreasingStep"
    std::vector<IterateRecord> log;

    PairingState pairing_state() const;  // requires pair_angles nonempty
};

struct EigenReport {
    Eigen::VectorXd eigenvalues;  // ascending
    Eigen::VectorXd residuals;    // per-orbital |H u_j - nu_j u_j|
    double sum = 0.0;
    bool stationary = true;  // false when residuals exceed 1e-3 |nu_N|
};

struct CriticalCouplingResult {
    int N = 0;
    double kappa = 0.0;
    OrbitalSet optimizer;  // normalized to Tr(sqrt(-Lap) gamma) = 1
    EigenReport eigen;
    double pohozaev_residual = 0.0;
    double virial_residual = 0.0;
    double d_star = 0.0;       // zero-mode-corrected inverse-sqrt trace
    double d_star_raw = 0.0;   // zero mode dropped
    double d_star_bias = 0.0;  // the dropped cell's estimated weight
    // Relative kappa shift under a warm re-solve in a 1.5x wider box.
    // The truncation radius scales with the box, so the discrete quotient
    // is exactly dilation-covariant and this lands at roundoff; resolution
    // error is tracked by the grid-count drift of d_star instead.
    double confinement_error = 0.0;
    double multistart_spread = 0.0;  // max-min over converged seeds
    bool converged = false;
    std::vector<MinimizeResult> seeds;  // per-seed outcomes, best first
};

struct HFSolveResult {
    MinimizeResult min;
    EnergyBreakdown energy;
    double tail_mass = 0.0;  // density mass beyond radius L/4, relative
    int box_restarts = 0;
};

struct ObjectiveEval {
    double value = 0.0;
    // d f / d conj(u_j), unprojected; df = 2 Re <v, G> along direction v
    Eigen::MatrixXcd orbital_gradient;
    Eigen::VectorXd occupation_gradient;  // QuotientRelaxed only
    Eigen::VectorXd angle_gradient;       // pairing objectives only
};

// Objective value and Euclidean Wirtinger gradients at a point, through the
// same code path the descent loop samples. No gauge fixing or tangent
// projection is applied. TFObjective is evaluated by tf_objective instead.
ObjectiveEval evaluate_objective(const OrbitalSet& state, ObjectiveKind kind,
                                 double mass, double kappa);
ObjectiveEval evaluate_objective(const PairingState& state, ObjectiveKind kind,
                                 double mass, double kappa);

// Mean-field operator action H u_j = T_m u_j - kappa Phi_rho u_j
// + kappa sum_k occ_k (K * p_jk) u_k, one column per orbital. For rank-1
// states the direct and exchange actions cancel and H u = T_m u exactly.
Eigen::MatrixXcd apply_meanfield(const OrbitalSet& state, double kappa,
                                 double mass, Fourier& fft);

// Diagonalizes <u_i, H u_j>, rotates the frame to the eigenbasis (gamma is
// invariant), and reports sorted eigenvalues with residuals. Rotation is
// applied to `state` in place.
EigenReport eigen_extract(OrbitalSet& state, double kappa, double mass,
                          Fourier& fft);

// Descent driver for the orbital-space objectives (HFEnergy, QuotientHF,
// QuotientRelaxed). The quotient objectives renormalize the box each
// iteration so Tr(sqrt(-Lap) gamma) = 1.
MinimizeResult minimize(const OrbitalSet& initial, const MinimizeConfig& cfg);

// Descent driver for the pairing objectives (HFBEnergy, QuotientHFB):
// orbitals and pair angles move jointly; angles stay in [0, pi/2].
// If trace_target > 0 the occupation sum 2 sum_k sin^2(theta_k) is held at
// that value by projection (the fixed-trace quotient scan).
MinimizeResult minimize(const PairingState& initial, const MinimizeConfig& cfg,
                        double trace_target = 0.0);

// Deterministic seed frames: Gaussian envelopes times low-order harmonic
// polynomials (degree < N), orthonormalized. seed selects the envelope
// width and the random perturbation.
OrbitalSet seed_state(const SpectralGrid& grid, int N, std::uint64_t seed);

// Exact dilation onto the box where Tr(sqrt(-Lap) gamma) = 1; a pure grid
// relabeling, the sample arrays are untouched.
void renormalize_kinetic(OrbitalSet& state, Fourier& fft);

// Multistart solve of the order-N critical coupling: minimizes the HF
// quotient from `starts` seeds (default 4), keeps the lowest value (ties by
// lowest seed), and derives the stationarity diagnostics. `warm` joins the
// seed list when provided. N = 1 is refused: the rank-1 denominator
// vanishes identically and kappa_1 is infinite.
CriticalCouplingResult solve_kappa_n(
    int N, const SpectralGrid& grid, MinimizeConfig cfg, int starts = 4,
    const std::optional<OrbitalSet>& warm = std::nullopt);

// Ground-state energy at subcritical coupling: alternates orbital descent
// with an exact dilation line search (dilation is a grid relabeling, so the
// energy is a closed function of the dilation factor given the cached
// spectral densities). Requires 0 < kappa < kappa_n_value and m > 0; the
// box grows (up to 3 restarts) until tail mass beyond L/4 is < 1e-6.
HFSolveResult solve_hf_energy(int N, double mass, double kappa,
                              double kappa_n_value, const SpectralGrid& grid,
                              MinimizeConfig cfg,
                              const std::optional<OrbitalSet>& warm =
                                  std::nullopt);

}  // namespace relstar
