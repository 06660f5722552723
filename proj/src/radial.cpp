#include "relstar/radial.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace relstar {

namespace {

constexpr double kFourPi = 4.0 * std::numbers::pi;

void require_nonnegative(const Eigen::VectorXd& f, const char* what) {
    for (int i = 0; i < f.size(); ++i)
        if (f[i] < 0.0)
            throw std::invalid_argument(std::string(what) +
                                        ": negative sample");
}

}  // namespace

RadialGrid RadialGrid::logarithmic(int count, double r_min, double r_max) {
    if (count < 8) throw std::invalid_argument("radial grid too small");
    if (!(r_min > 0.0 && r_max > r_min))
        throw std::invalid_argument("need 0 < r_min < r_max");
    RadialGrid g;
    g.radii.resize(count);
    const double step = std::log(r_max / r_min) / (count - 1);
    for (int i = 0; i < count; ++i) g.radii[i] = r_min * std::exp(i * step);
    g.radii[count - 1] = r_max;

    // Product weights: exact for piecewise-linear integrands on [0, r_M],
    // the sample treated as constant on the core cell [0, r_1].
    g.weights = Eigen::VectorXd::Zero(count);
    g.weights[0] = kFourPi * std::pow(g.radii[0], 3) / 3.0;
    for (int i = 0; i + 1 < count; ++i) {
        const double a = g.radii[i], b = g.radii[i + 1];
        const double d = b - a;
        const double i3 = (b * b * b - a * a * a) / 3.0;
        const double i4 = (b * b * b * b - a * a * a * a) / 4.0;
        g.weights[i] += kFourPi * (b * i3 - i4) / d;
        g.weights[i + 1] += kFourPi * (i4 - a * i3) / d;
    }
    return g;
}

Eigen::VectorXd newton_potential(const RadialGrid& grid,
                                 const Eigen::VectorXd& f) {
    const int m = grid.count();
    if (f.size() != m) throw std::invalid_argument("sample count mismatch");
    const Eigen::VectorXd charge = grid.weights.cwiseProduct(f);
    Eigen::VectorXd phi(m);
    // Inner charge over r plus the 1/s-weighted outer sum, both by prefix
    // sums of the node charges; together the shell identity
    // Phi(r) = 4 pi [ (1/r) int_0^r f s^2 ds + int_r^inf f s ds ].
    double inner = 0.0;
    for (int i = 0; i < m; ++i) {
        inner += charge[i];
        phi[i] = inner / grid.radii[i];
    }
    double outer = 0.0;
    for (int i = m - 1; i >= 0; --i) {
        phi[i] += outer;
        outer += charge[i] / grid.radii[i];
    }
    return phi;
}

double radial_coulomb_energy(const RadialGrid& grid, const Eigen::VectorXd& f,
                             const Eigen::VectorXd& g) {
    require_nonnegative(f, "radial_coulomb_energy");
    require_nonnegative(g, "radial_coulomb_energy");
    const Eigen::VectorXd phi = newton_potential(grid, g);
    return grid.weights.cwiseProduct(f).dot(phi);
}

double fermi_gas_constant() {
    return 0.75 * std::cbrt(6.0 * std::numbers::pi * std::numbers::pi);
}

namespace {

struct TFTerms {
    double mass;    // int f
    double lp43;    // int f^{4/3}
    double direct;  // D(f, f)
    Eigen::VectorXd phi;
    double value;
};

TFTerms tf_terms(const RadialGrid& grid, const Eigen::VectorXd& f) {
    TFTerms t;
    t.mass = grid.integrate(f);
    t.lp43 = grid.integrate(f.array().pow(4.0 / 3.0).matrix());
    t.phi = newton_potential(grid, f);
    t.direct = grid.weights.cwiseProduct(f).dot(t.phi);
    t.value = 2.0 * fermi_gas_constant() * t.lp43 *
              std::pow(t.mass, 2.0 / 3.0) / t.direct;
    return t;
}

}  // namespace

double tf_objective(const RadialGrid& grid, const Eigen::VectorXd& f) {
    require_nonnegative(f, "tf_objective");
    if (!(f.maxCoeff() > 0.0))
        throw std::invalid_argument("tf_objective: identically zero input");
    return tf_terms(grid, f).value;
}

Eigen::VectorXd tf_gradient(const RadialGrid& grid,
                            const Eigen::VectorXd& f) {
    require_nonnegative(f, "tf_gradient");
    if (!(f.maxCoeff() > 0.0))
        throw std::invalid_argument("tf_gradient: identically zero input");
    const TFTerms t = tf_terms(grid, f);
    const double c2 = 2.0 * fermi_gas_constant();
    const double m23 = std::pow(t.mass, 2.0 / 3.0);
    Eigen::VectorXd g(f.size());
    for (int i = 0; i < f.size(); ++i) {
        const double numerator_part =
            (4.0 / 3.0) * std::cbrt(f[i]) * m23 +
            (2.0 / 3.0) * t.lp43 / std::cbrt(t.mass);
        g[i] = grid.weights[i] * c2 *
               (numerator_part / t.direct -
                t.lp43 * m23 * 2.0 * t.phi[i] / (t.direct * t.direct));
    }
    return g;
}

namespace {

struct TFDescent {
    Eigen::VectorXd f;
    double value = 0.0;
    bool converged = false;
    int iterations = 0;
    std::vector<IterateRecord> log;
};

TFDescent tf_descend(const RadialGrid& grid, Eigen::VectorXd f,
                     const MinimizeConfig& cfg) {
    // Descend in the square-root variable u with f = u^2. The substitution
    // keeps f nonnegative without a projection and, because the optimal
    // profile vanishes on an outer region where f^{4/3} is not twice
    // differentiable, restores bounded curvature at the free boundary.
    // The direction divides out the quadrature weights (which span nine
    // orders of magnitude on a logarithmic grid) so it follows the
    // functional derivative rather than the node gradient.
    TFDescent out;
    Eigen::VectorXd u = f.cwiseMax(0.0).cwiseSqrt();
    u /= std::sqrt(grid.integrate(u.cwiseAbs2()));
    f = u.cwiseAbs2();
    double value = tf_objective(grid, f);
    double step = cfg.initial_step;
    double best = value;
    int no_improvement = 0;
    constexpr int kWarmup = 50;
    const int stride = std::max(1, cfg.log_stride);

    int it = 0;
    for (; it < cfg.max_iterations; ++it) {
        const Eigen::VectorXd d =
            2.0 * u.cwiseProduct(
                      tf_gradient(grid, f).cwiseQuotient(grid.weights));
        const double gnorm = d.norm();
        if (it % stride == 0)
            out.log.push_back({it, value, gnorm, step});
        if (gnorm <= cfg.gradient_tolerance * (1.0 + std::abs(value))) {
            out.converged = true;
            break;
        }

        bool accepted = false;
        for (int half = 0; half < 60; ++half) {
            Eigen::VectorXd trial_u = u - step * d;
            const double tm = grid.integrate(trial_u.cwiseAbs2());
            if (tm > 0.0) {
                trial_u /= std::sqrt(tm);
                const Eigen::VectorXd trial_f = trial_u.cwiseAbs2();
                const double tv = tf_objective(grid, trial_f);
                const double moved = (trial_u - u).squaredNorm();
                if (tv <= value - 1e-4 / std::max(step, 1e-300) * moved) {
                    u = std::move(trial_u);
                    f = trial_f;
                    value = tv;
                    step *= 1.8;
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if (!accepted) break;  // line search exhausted: round-off floor

        if (value < best - 1e-15 * std::abs(best)) {
            best = value;
            no_improvement = 0;
        } else if (it > kWarmup && ++no_improvement >= 100) {
            break;
        }
    }
    out.iterations = it;
    out.f = std::move(f);
    out.value = value;
    out.log.push_back({it, value, 0.0, step});
    return out;
}

Eigen::VectorXd tf_initial(const RadialGrid& grid) {
    // Compact bump with the expected polytrope-like scale; the quotient's
    // flat scale directions make the precise width immaterial.
    Eigen::VectorXd f(grid.count());
    for (int i = 0; i < grid.count(); ++i) {
        const double r = grid.radii[i];
        f[i] = std::exp(-r * r / 9.0);
    }
    return f;
}

}  // namespace

TFResult solve_tf(const MinimizeConfig& cfg, int count, bool refine) {
    const RadialGrid grid = RadialGrid::logarithmic(count);
    TFDescent run = tf_descend(grid, tf_initial(grid), cfg);

    TFResult out;
    out.value = run.value;
    out.converged = run.converged;
    out.iterations = run.iterations;
    out.log = std::move(run.log);

    if (refine) {
        const RadialGrid fine = RadialGrid::logarithmic(2 * count);
        Eigen::VectorXd warm(fine.count());
        // Interpolate the coarse minimizer linearly in log r.
        const double lo = std::log(grid.radii[0]);
        const double step =
            std::log(grid.radii[grid.count() - 1] / grid.radii[0]) /
            (grid.count() - 1);
        for (int i = 0; i < fine.count(); ++i) {
            const double x = (std::log(fine.radii[i]) - lo) / step;
            const int j = std::clamp(static_cast<int>(std::floor(x)), 0,
                                     grid.count() - 2);
            const double w = x - j;
            warm[i] = (1.0 - w) * run.f[j] + w * run.f[j + 1];
        }
        MinimizeConfig refine_cfg = cfg;
        refine_cfg.max_iterations = std::max(cfg.max_iterations / 2, 500);
        const TFDescent fine_run = tf_descend(fine, warm, refine_cfg);
        out.refinement_delta =
            std::abs(fine_run.value - run.value) / std::abs(run.value);
    }

    // Fix both scale freedoms exactly by relabeling: f -> a f(b r) with
    // int f = 1 and int f^{4/3} = 1 is a pure rescale of grid labels.
    const double mass = grid.integrate(run.f);
    const double lp43 =
        grid.integrate(run.f.array().pow(4.0 / 3.0).matrix());
    const double a = std::pow(mass / lp43, 3.0);
    const double b = std::cbrt(a * mass);
    out.grid.radii = grid.radii / b;
    out.grid.weights = grid.weights / (b * b * b);
    out.minimizer = a * run.f;

    // Tail-monotonicity diagnostic beyond the peak.
    int peak = 0;
    run.f.maxCoeff(&peak);
    out.tail_monotone = true;
    const double slack = 1e-12 * run.f[peak];
    for (int i = peak + 1; i < run.f.size(); ++i)
        if (run.f[i] > run.f[i - 1] + slack) {
            out.tail_monotone = false;
            break;
        }
    return out;
}

ScalingCheck chandrasekhar_scaling_check(
    const std::vector<std::pair<int, double>>& kappa_table, double tau_c) {
    ScalingCheck out;
    const double target = std::pow(tau_c, 1.5);
    int n_max = 0;
    for (const auto& [n, kappa] : kappa_table) {
        ScalingRow row;
        row.N = n;
        row.kappa = kappa;
        row.product = std::pow(kappa, 1.5) * n;
        row.deviation = std::abs(row.product - target) / target;
        out.rows.push_back(row);
        n_max = std::max(n_max, n);
    }
    std::sort(out.rows.begin(), out.rows.end(),
              [](const ScalingRow& a, const ScalingRow& b) {
                  return a.N < b.N;
              });
    out.inconclusive = n_max < 4 || out.rows.size() < 3;
    out.deviations_decreasing = !out.rows.empty();
    for (size_t i = 1; i < out.rows.size(); ++i)
        if (out.rows[i].deviation >= out.rows[i - 1].deviation)
            out.deviations_decreasing = false;
    return out;
}

}  // namespace relstar
