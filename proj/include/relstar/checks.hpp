#pragma once

#include <string>
#include <vector>

#include "relstar/states.hpp"

namespace relstar {

struct CheckResult {
    std::string name;
    bool pass = false;
    std::string detail;  // worst observed metric, or the failure reason
};

// Deterministic invariant suite behind the `check` command: transform
// round trips, multiplier table identities, dilation bookkeeping, state
// admissibility and checkpoint round trips, the Hardy-Kato inequality on
// 200 random smooth states at 32^3, dense O(n^6) quadratic-form oracles on
// an 8^3 grid, and the radial quadrature identities. Runs in minutes.
std::vector<CheckResult> run_check_suite();

// Count of Hardy-Kato violations <u, V u> > (pi/2 + slack) <u, |grad| u>
// over `count` random smooth states, with V the lattice kernel induced by
// the given truncated-Coulomb table. Zero for the honest table; a corrupted
// table (the fixture scales it) must be caught, which the suite verifies.
int hardy_kato_violations(const SpectralGrid& grid,
                          const RealField& coulomb_table, int count,
                          std::uint64_t seed, double* worst_ratio = nullptr);

}  // namespace relstar
