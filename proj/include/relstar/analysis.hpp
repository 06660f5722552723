#pragma once

#include <map>
#include <string>
#include <vector>

#include "relstar/minimize.hpp"

namespace relstar {

// Scan drivers: dilation trajectories, near-critical blow-up chains, decay
// and rank diagnostics, and the coupling classifier. Everything lands in
// column-oriented tables with string metadata so the front end can emit
// them unchanged.

struct ScanTable {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
    std::map<std::string, std::string> metadata;

    int column(const std::string& name) const;  // throws on unknown name
    std::string csv() const;  // header + rows, fields via %.17g, CRLF ends
};

// Power law y = C x^p by least squares on the log-log pairs; rows with a
// nonpositive coordinate are skipped and do not count toward `points`.
struct RateFit {
    double exponent = 0.0;
    double prefactor = 0.0;
    double r_squared = 0.0;
    int points = 0;
};
RateFit fit_rate(const std::vector<double>& x, const std::vector<double>& y);

// Dilation flow of a fixed pairing state: for each beta the relabeled
// state's massive energy is split exactly into beta times the massless
// energy plus the spectral gap trace,
//   E_m(u_beta) + m Tr(gamma) = beta E_0(u) + Tr(B_{m,beta} gamma),
// columns beta, energy, energy_plus_mass, massless_scaled, gap_trace,
// gap_bulk, identity_residual (relative). beta = 1 reproduces hfb_energy
// exactly. The gap multiplier is pinned to m at the zero mode, so on the
// torus the trace keeps a beta-independent floor m sum occ |u_hat(0)|^2
// (metadata key zero_mode_floor); gap_bulk subtracts it and is the part
// that decays like 1/beta.
ScanTable hfb_scaling_trajectory(const PairingState& state, double mass,
                                 double kappa,
                                 const std::vector<double>& betas);

struct BlowupScan {
    ScanTable table;      // fraction, kappa, distance, energy, gap, epsilon,
                          // d_star, ratio, converged, box_restarts
    RateFit gap_fit;      // gap vs kappa_n - kappa
    RateFit epsilon_fit;  // blow-up scale vs kappa_n - kappa
    double prefactor_ratio = 0.0;  // mean of gap/(m^2 d* eps) over fit rows
    double kappa_n = 0.0;
    int excluded = 0;  // unconverged rows plus the two nearest the critical
};

// Warm-started chain of subcritical ground-state solves at
// kappa = fraction * kappa_n, ascending. The blow-up scale is the inverse
// massless kinetic trace; the gap is energy + m N. Fits exclude the two
// converged rows nearest the critical coupling (least resolved) and every
// unconverged row.
BlowupScan blowup_scan(int N, double mass,
                       const std::vector<double>& fractions,
                       const SpectralGrid& grid, MinimizeConfig cfg,
                       const CriticalCouplingResult& critical);

struct DStarReport {
    double value = 0.0;  // smallest corrected trace over converged starts
    double raw = 0.0;    // zero mode dropped, for the reported minimum
    double bias = 0.0;   // zero-cell estimate added back
    double rank_bound = 0.0;  // N^2
    bool bound_holds = false;
    std::vector<double> per_start;
};

// Inverse-sqrt trace of each converged multistart optimizer after exact
// renormalization to unit kinetic trace. The trace of any order-N quotient
// optimizer is bounded below by N^2; `bound_holds` allows 5e-3 relative.
DStarReport extract_d_star(const CriticalCouplingResult& critical);

struct DecayReport {
    ScanTable shells;  // radius, mean_density over log-spaced shells
    double slope = 0.0;            // d log(mean) / d log(1+r)
    double bound_constant = 0.0;   // minimal C with mean <= C (1+r)^{-8}
    double window_decades = 0.0;   // density decades spanned by the window
    bool qualitative = false;      // window spans fewer than 3 decades
};

// Shell-averaged density decay over radii in [L/8, L/3]. Outside that
// window the near field and the periodic images dominate, so the fit says
// nothing there by construction.
DecayReport decay_diagnostic(const OrbitalSet& state, int shell_count = 24);

struct ThresholdEntry {
    int N = 0;
    double kappa_n = 0.0;
    double confinement_error = 0.0;
};

struct KappaClassification {
    int max_stable = 1;      // largest tabulated order with kappa < kappa_N
    bool at_boundary = false;  // within the confinement resolution of some
                               // threshold
    int boundary_N = 0;
    double margin = 0.0;  // the boundary threshold's absolute resolution
};

// Classifies a coupling against a table of critical values (N ascending,
// kappa_N strictly decreasing). kappa at or above the order-2 value leaves
// only single-particle stability; kappa below the smallest tabulated value
// is out of range (the true largest stable order is beyond the table) and
// throws std::out_of_range.
KappaClassification classify_kappa(double kappa,
                                   const std::vector<ThresholdEntry>& table);

struct HFBQuotientScan {
    ScanTable table;  // trace, kappa_hat, kappa_pairing_off, iterations,
                      // converged
    bool monotone = true;  // kappa_hat nonincreasing along ascending trace
};

// Fixed-trace HFB quotient minimization over a list of occupation sums in
// (0, 2 * pairs]. kappa_pairing_off rescores each minimizer with the
// pairing term removed from the denominator, so the column pair shows the
// strict improvement from pairing at equal trace.
HFBQuotientScan hfb_quotient_scan(const std::vector<double>& traces,
                                  int pairs, const SpectralGrid& grid,
                                  MinimizeConfig cfg);

}  // namespace relstar
