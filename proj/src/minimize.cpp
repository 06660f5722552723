#include "relstar/minimize.hpp"

#include "relstar/io_util.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <utility>

namespace relstar {

namespace {

// --- deterministic RNG (SplitMix64 + Box-Muller), independent of any
// standard-library distribution implementation -------------------------

struct SplitMix64 {
    std::uint64_t s;
    explicit SplitMix64(std::uint64_t seed) : s(seed) {}
    std::uint64_t next() {
        std::uint64_t z = (s += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }
    double uniform() {  // (0,1)
        return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53;
    }
    double normal() {
        const double u = uniform(), v = uniform();
        return std::sqrt(-2.0 * std::log(u)) *
               std::cos(2.0 * std::numbers::pi * v);
    }
};

int triangle_index(int j, int k, int n) {  // j <= k
    return j * n - j * (j - 1) / 2 + (k - j);
}

// Multiplier tables tied to the current box; rebuilt on relabel.
struct Tables {
    double box = -1.0;
    double mass = -1.0;
    RealField massless, massive, coulomb;
    void refresh(const SpectralGrid& g, double m) {
        if (g.box_length == box && m == mass) return;
        box = g.box_length;
        mass = m;
        massless = build_multiplier(g, MultiplierSpec::massless());
        massive = (m == 0.0)
                      ? massless
                      : build_multiplier(g, MultiplierSpec::kinetic(m));
        coulomb = build_multiplier(g, MultiplierSpec::coulomb());
    }
};

bool is_quotient(ObjectiveKind k) {
    return k == ObjectiveKind::QuotientHF ||
           k == ObjectiveKind::QuotientRelaxed ||
           k == ObjectiveKind::QuotientHFB;
}

bool is_pairing(ObjectiveKind k) {
    return k == ObjectiveKind::HFBEnergy || k == ObjectiveKind::QuotientHFB;
}

// Full evaluation bundle: scalars always, gradients on demand.
struct Eval {
    double f = 0.0;
    double kinetic = 0.0;  // with the objective's kinetic multiplier
    double direct = 0.0;
    double exchange = 0.0;
    double pairing = 0.0;
    Eigen::MatrixXcd grad;        // Euclidean orbital gradient
    Eigen::VectorXd grad_occ;     // QuotientRelaxed only
    Eigen::VectorXd grad_theta;   // pairing objectives only
    Eigen::MatrixXcd uhat;        // spectral orbitals (dilation line search)
    Eigen::VectorXd kinetic_per;  // per-column <u, T u>
};

Eigen::VectorXd duplicated_occupations(const Eigen::VectorXd& lambda) {
    Eigen::VectorXd occ(2 * lambda.size());
    for (int k = 0; k < lambda.size(); ++k)
        occ[2 * k] = occ[2 * k + 1] = lambda[k];
    return occ;
}

// Shared evaluator for every orbital/pairing objective. The same
// contraction conventions as the public functionals; the returned state is
// re-scored through the public entry points at the end of each solve so the
// reported value and gn_quotient/hf_energy agree exactly.
Eval evaluate(const SpectralGrid& grid, const Eigen::MatrixXcd& U,
              const Eigen::VectorXd& occ, const Eigen::VectorXd& theta,
              ObjectiveKind kind, double mass, double kappa,
              const Tables& tables, Fourier& fft, bool want_grad) {
    const int cols = static_cast<int>(U.cols());
    const long n3 = U.rows();
    const double h3 = grid.cell_volume();
    Eval e;

    const RealField& kin_table =
        (kind == ObjectiveKind::HFEnergy || kind == ObjectiveKind::HFBEnergy)
            ? tables.massive
            : tables.massless;

    e.uhat.resize(n3, cols);
    e.kinetic_per.resize(cols);
    for (int j = 0; j < cols; ++j) {
        fft.forward(U.col(j).data(), e.uhat.col(j).data());
        e.kinetic_per[j] =
            (e.uhat.col(j).array().abs2() * kin_table.array()).sum();
        e.kinetic += occ[j] * e.kinetic_per[j];
    }

    RealField rho = RealField::Zero(n3);
    for (int j = 0; j < cols; ++j)
        rho += occ[j] * U.col(j).array().abs2().matrix();
    rho /= h3;
    Field phi_c = apply_multiplier(tables.coulomb, rho.cast<Complex>(), fft);
    const RealField phi = phi_c.real();
    e.direct = h3 * rho.dot(phi);

    // Pair potentials K * (u_j conj(u_k) / h^3) for j <= k.
    const int pairs = cols * (cols + 1) / 2;
    std::vector<Field> pair_phi(pairs);
    {
        Field p(n3);
        for (int j = 0; j < cols; ++j) {
            for (int k = j; k < cols; ++k) {
                p = U.col(j).cwiseProduct(U.col(k).conjugate()) / h3;
                pair_phi[triangle_index(j, k, cols)] =
                    apply_multiplier(tables.coulomb, p, fft);
            }
        }
    }
    Eigen::MatrixXd xpair = Eigen::MatrixXd::Zero(cols, cols);
    for (int j = 0; j < cols; ++j) {
        for (int k = j; k < cols; ++k) {
            const Field p =
                U.col(j).cwiseProduct(U.col(k).conjugate()) / h3;
            const double c =
                h3 *
                (p.conjugate().array() *
                 pair_phi[triangle_index(j, k, cols)].array())
                    .sum()
                    .real();
            xpair(j, k) = xpair(k, j) = c;
        }
    }
    {
        double acc = 0.0, comp = 0.0;
        for (int j = 0; j < cols; ++j)
            for (int k = j; k < cols; ++k) {
                const double w = (j == k ? 1.0 : 2.0) * occ[j] * occ[k];
                const double term = w * xpair(j, k) - comp;
                const double next = acc + term;
                comp = (next - acc) - term;
                acc = next;
            }
        e.exchange = acc;
    }

    // Pairing contractions: four Coulomb-convolved mixed densities per
    // unordered pair of pairs. Slot 0/1 inside frame pair k is a_k/b_k.
    const int K = static_cast<int>(theta.size());
    Eigen::VectorXd amp(K), dlam(K), damp(K);
    std::vector<std::array<Field, 4>> mix;  // [aa, bb, ab, ba] for k<=m
    Eigen::MatrixXd pair_contr;  // Re[C1 - C2] over ordered (k,m)
    if (K > 0) {
        for (int k = 0; k < K; ++k) {
            amp[k] = std::sin(theta[k]) * std::cos(theta[k]);
            dlam[k] = std::sin(2.0 * theta[k]);
            damp[k] = std::cos(2.0 * theta[k]);
        }
        auto a_of = [&](int k) { return U.col(2 * k); };
        auto b_of = [&](int k) { return U.col(2 * k + 1); };
        mix.resize(K * (K + 1) / 2);
        for (int k = 0; k < K; ++k) {
            for (int m = k; m < K; ++m) {
                auto& slot = mix[triangle_index(k, m, K)];
                slot[0] = pair_potential(grid, a_of(k), a_of(m),
                                         tables.coulomb, fft);
                slot[1] = pair_potential(grid, b_of(k), b_of(m),
                                         tables.coulomb, fft);
                slot[2] = pair_potential(grid, a_of(k), b_of(m),
                                         tables.coulomb, fft);
                slot[3] = pair_potential(grid, b_of(k), a_of(m),
                                         tables.coulomb, fft);
            }
        }
        // Contractions C1(k,m) = C(s^{a_k a_m}, s^{b_k b_m}) and
        // C2(k,m) = C(s^{a_k b_m}, s^{b_k a_m}); for k <= m read the stored
        // potentials directly, the transpose entries by conjugation.
        pair_contr.resize(K, K);
        for (int k = 0; k < K; ++k) {
            for (int m = k; m < K; ++m) {
                const auto& slot = mix[triangle_index(k, m, K)];
                const Field s_aa =
                    a_of(k).cwiseProduct(a_of(m).conjugate()) / h3;
                const Field s_ab =
                    a_of(k).cwiseProduct(b_of(m).conjugate()) / h3;
                const Complex c1 =
                    h3 * (s_aa.array() * slot[1].array()).sum();
                const Complex c2 =
                    h3 * (s_ab.array() * slot[3].array()).sum();
                pair_contr(k, m) = (c1 - c2).real();
                pair_contr(m, k) = pair_contr(k, m);
            }
        }
        double acc = 0.0, comp = 0.0;
        for (int k = 0; k < K; ++k)
            for (int m = 0; m < K; ++m) {
                const double term =
                    2.0 * amp[k] * amp[m] * pair_contr(k, m) - comp;
                const double next = acc + term;
                comp = (next - acc) - term;
                acc = next;
            }
        e.pairing = acc;
    }

    // Objective assembly.
    double den = 0.0, num = 0.0, norm = 1.0;
    switch (kind) {
        case ObjectiveKind::HFEnergy:
            e.f = e.kinetic - 0.5 * kappa * (e.direct - e.exchange);
            break;
        case ObjectiveKind::HFBEnergy:
            e.f = e.kinetic - 0.5 * kappa * (e.direct - e.exchange) -
                  0.5 * kappa * e.pairing;
            break;
        case ObjectiveKind::QuotientHF:
        case ObjectiveKind::QuotientRelaxed:
        case ObjectiveKind::QuotientHFB: {
            norm = (kind == ObjectiveKind::QuotientRelaxed)
                       ? occ.maxCoeff()
                       : 1.0;
            num = 2.0 * norm * e.kinetic;
            den = e.direct - e.exchange;
            if (kind == ObjectiveKind::QuotientHFB) den += e.pairing;
            if (den <= 1e-12 * std::max(std::abs(num), 1e-30))
                throw DegenerateDenominator(
                    "trial state carries no net attraction");
            e.f = num / den;
            break;
        }
        default:
            throw std::invalid_argument("objective not an orbital objective");
    }
    if (!want_grad) return e;

    // --- Euclidean gradients, convention df = 2 Re sum_j <v_j, G_j> ------

    e.grad.resize(n3, cols);
    Field tmp(n3);
    auto pair_phi_of = [&](int j, int k) -> Field {
        // K * p_jk; for j > k the stored conjugate transpose entry.
        if (j <= k) return pair_phi[triangle_index(j, k, cols)];
        return pair_phi[triangle_index(k, j, cols)].conjugate();
    };
    for (int j = 0; j < cols; ++j) {
        // kinetic action via the multiplier
        Field khat = kin_table.cast<Complex>().cwiseProduct(e.uhat.col(j));
        fft.backward(khat.data(), tmp.data());
        Field xop = Field::Zero(n3);
        for (int k = 0; k < cols; ++k)
            xop += occ[k] * pair_phi_of(j, k).cwiseProduct(U.col(k));
        switch (kind) {
            case ObjectiveKind::HFEnergy:
            case ObjectiveKind::HFBEnergy:
                e.grad.col(j) =
                    occ[j] * (tmp - kappa * phi_c.real().cast<Complex>()
                                               .cwiseProduct(U.col(j)) +
                              kappa * xop);
                break;
            default: {
                // d(num)/dconj u_j = 2 norm occ_j T u_j
                // d(den)/dconj u_j = 2 occ_j (Phi u_j - Xop u_j) [+ pairing]
                Field gden =
                    2.0 * occ[j] *
                    (phi_c.real().cast<Complex>().cwiseProduct(U.col(j)) -
                     xop);
                e.grad.col(j) =
                    (2.0 * norm * occ[j] * tmp - e.f * gden) / den;
                break;
            }
        }
    }

    // Pairing-term orbital gradient.
    if (K > 0 && (kind == ObjectiveKind::HFBEnergy ||
                  kind == ObjectiveKind::QuotientHFB)) {
        auto a_of = [&](int k) { return U.col(2 * k); };
        auto b_of = [&](int k) { return U.col(2 * k + 1); };
        auto mix_of = [&](int k, int m, int which) -> Field {
            // which: 0 aa, 1 bb, 2 ab, 3 ba over ordered (k,m)
            if (k <= m) return mix[triangle_index(k, m, K)][which];
            const int swapped[4] = {0, 1, 3, 2};
            return mix[triangle_index(m, k, K)][swapped[which]].conjugate();
        };
        for (int m = 0; m < K; ++m) {
            Field ga = Field::Zero(n3);
            Field gb = Field::Zero(n3);
            for (int k = 0; k < K; ++k) {
                ga += amp[k] * (mix_of(k, m, 1).cwiseProduct(a_of(k)) -
                                mix_of(k, m, 2).cwiseProduct(b_of(k)));
                gb += amp[k] * (mix_of(k, m, 0).cwiseProduct(b_of(k)) -
                                mix_of(k, m, 3).cwiseProduct(a_of(k)));
            }
            ga *= 2.0 * amp[m];
            gb *= 2.0 * amp[m];
            if (kind == ObjectiveKind::HFBEnergy) {
                e.grad.col(2 * m) += -0.5 * kappa * ga;
                e.grad.col(2 * m + 1) += -0.5 * kappa * gb;
            } else {  // quotient: pairing sits in the denominator with +
                e.grad.col(2 * m) += (-e.f / den) * ga;
                e.grad.col(2 * m + 1) += (-e.f / den) * gb;
            }
        }
    }

    // Occupation gradient (QuotientRelaxed): subgradient of the max picks
    // the first maximal occupation for determinism.
    if (kind == ObjectiveKind::QuotientRelaxed) {
        int arg = 0;
        occ.maxCoeff(&arg);
        e.grad_occ.resize(cols);
        for (int j = 0; j < cols; ++j) {
            const double ddir =
                2.0 * h3 * (U.col(j).array().abs2() / h3 * phi.array()).sum();
            double dx = 0.0;
            for (int k = 0; k < cols; ++k)
                dx += 2.0 * occ[k] * xpair(j, k);
            double dnum = 2.0 * norm * e.kinetic_per[j];
            if (j == arg) dnum += 2.0 * e.kinetic;
            e.grad_occ[j] = (dnum - e.f * (ddir - dx)) / den;
        }
    }

    // Angle gradient for the pairing objectives.
    if (K > 0 && (kind == ObjectiveKind::HFBEnergy ||
                  kind == ObjectiveKind::QuotientHFB)) {
        e.grad_theta.resize(K);
        for (int k = 0; k < K; ++k) {
            const double dkin =
                e.kinetic_per[2 * k] + e.kinetic_per[2 * k + 1];
            const double ddir =
                2.0 * h3 *
                ((U.col(2 * k).array().abs2() +
                  U.col(2 * k + 1).array().abs2()) /
                 h3 * phi.array())
                    .sum();
            double dx = 0.0;
            for (int c = 0; c < cols; ++c)
                dx += 2.0 * occ[c] *
                      (xpair(2 * k, c) + xpair(2 * k + 1, c));
            double dpair = 0.0;
            for (int m = 0; m < K; ++m)
                dpair += 4.0 * amp[m] * pair_contr(k, m);
            if (kind == ObjectiveKind::HFBEnergy) {
                e.grad_theta[k] =
                    dlam[k] * (dkin - 0.5 * kappa * (ddir - dx)) -
                    0.5 * kappa * damp[k] * dpair;
            } else {
                const double dnum = 2.0 * dlam[k] * dkin;
                const double dden =
                    dlam[k] * (ddir - dx) + damp[k] * dpair;
                e.grad_theta[k] = (dnum - e.f * dden) / den;
            }
        }
    }
    return e;
}

// Tangent projection on the orthonormal-frame manifold.
Eigen::MatrixXcd tangent_project(const Eigen::MatrixXcd& U,
                                 const Eigen::MatrixXcd& G) {
    const Eigen::MatrixXcd M = U.adjoint() * G;
    return G - U * ((M + M.adjoint()) * 0.5);
}

// Kinetic preconditioner (|xi| + s)^{-1} applied columnwise in frequency
// space, then reprojected to the tangent space.
Eigen::MatrixXcd precondition(const SpectralGrid& grid,
                              const Eigen::MatrixXcd& U,
                              const Eigen::MatrixXcd& G,
                              const RealField& massless, Fourier& fft) {
    const double shift = 1.0 / static_cast<double>(U.cols());
    Eigen::MatrixXcd P(G.rows(), G.cols());
    Field tmp(G.rows());
    for (int j = 0; j < G.cols(); ++j) {
        fft.forward(G.col(j).data(), tmp.data());
        tmp.array() /= (massless.array() + shift);
        fft.backward(tmp.data(), P.col(j).data());
    }
    return tangent_project(U, P);
}

double frame_inner(const Eigen::MatrixXcd& A, const Eigen::MatrixXcd& B) {
    return 2.0 * (A.conjugate().cwiseProduct(B)).sum().real();
}

// Projection of lambda onto {sum 2 lambda = target, 0 <= lambda <= 1} by
// bisection on the uniform shift.
Eigen::VectorXd project_trace(Eigen::VectorXd lam, double target) {
    const int K = static_cast<int>(lam.size());
    auto total = [&](double shift) {
        double s = 0.0;
        for (int k = 0; k < K; ++k)
            s += 2.0 * std::clamp(lam[k] + shift, 0.0, 1.0);
        return s;
    };
    double lo = -1.0, hi = 1.0;
    while (total(lo) > target) lo = 2.0 * lo - 1.0;
    while (total(hi) < target) hi = 2.0 * hi + 1.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (total(mid) < target ? lo : hi) = mid;
    }
    const double shift = 0.5 * (lo + hi);
    for (int k = 0; k < K; ++k) lam[k] = std::clamp(lam[k] + shift, 0.0, 1.0);
    return lam;
}

struct EngineResult {
    SpectralGrid grid;
    Eigen::MatrixXcd U;
    Eigen::VectorXd occ;
    Eigen::VectorXd theta;
    double objective = 0.0;
    double gradient_norm = 0.0;
    int iterations = 0;
    bool converged = false;
    std::string stop_reason;
    std::vector<IterateRecord> log;
};

// The descent loop shared by all orbital and pairing objectives.
EngineResult descend(SpectralGrid grid, Eigen::MatrixXcd U,
                     Eigen::VectorXd occ, Eigen::VectorXd theta,
                     const MinimizeConfig& cfg, double trace_target) {
    Fourier fft(grid.n);
    Tables tables;
    EngineResult out;
    const bool quotient = is_quotient(cfg.objective);
    const bool relaxed = cfg.objective == ObjectiveKind::QuotientRelaxed;
    const bool pairing = is_pairing(cfg.objective);
    const bool renormalize =
        quotient && cfg.box_adaptation != BoxAdaptation::Off;
    const int stride = std::max(1, cfg.log_stride);

    double step = cfg.initial_step;
    double pending_kinetic = -1.0;
    int it = 0;
    std::string stop = "max_iterations";
    bool converged = false;
    Eval e;
    if (cfg.max_iterations <= 0) {
        tables.refresh(grid, cfg.mass);
        e = evaluate(grid, U, occ, theta, cfg.objective, cfg.mass, cfg.kappa,
                     tables, fft, false);
    }

    for (; it < cfg.max_iterations; ++it) {
        if (renormalize && pending_kinetic > 0.0 &&
            std::abs(pending_kinetic - 1.0) > 1e-15)
            grid = grid.dilated(1.0 / pending_kinetic);
        tables.refresh(grid, cfg.mass);
        e = evaluate(grid, U, occ, theta, cfg.objective, cfg.mass, cfg.kappa,
                     tables, fft, true);

        Eigen::MatrixXcd gt = tangent_project(U, e.grad);
        Eigen::MatrixXcd dir =
            precondition(grid, U, gt, tables.massless, fft);
        double descent = frame_inner(dir, e.grad);
        if (!(descent > 1e-14 * std::sqrt(frame_inner(dir, dir) *
                                          frame_inner(gt, gt)))) {
            dir = gt;  // preconditioner left the descent cone
            descent = frame_inner(gt, gt);
        }

        // Projected-gradient norms for the box-constrained blocks.
        double gnorm2 = frame_inner(gt, gt) / 2.0;
        Eigen::VectorXd occ_pg, theta_pg;
        if (relaxed) {
            occ_pg = occ - (occ - e.grad_occ).cwiseMax(0.0).cwiseMin(1.0);
            gnorm2 += occ_pg.squaredNorm();
        }
        if (pairing) {
            Eigen::VectorXd t =
                (theta - e.grad_theta)
                    .cwiseMax(0.0)
                    .cwiseMin(std::numbers::pi / 2.0);
            theta_pg = theta - t;
            gnorm2 += theta_pg.squaredNorm();
        }
        const double gnorm = std::sqrt(gnorm2);
        out.gradient_norm = gnorm;
        if (it % stride == 0)
            out.log.push_back({it, e.f, gnorm, step});
        if (gnorm <= cfg.gradient_tolerance * (1.0 + std::abs(e.f))) {
            converged = true;
            stop = "tolerance";
            break;
        }

        bool accepted = false;
        for (int half = 0; half < 60; ++half) {
            Eigen::MatrixXcd Ut = U - step * dir;
            try {
                orthonormalize(Ut);
            } catch (const std::exception&) {
                step *= 0.5;
                continue;
            }
            Eigen::VectorXd occt = occ;
            if (relaxed) {
                occt = (occ - step * e.grad_occ)
                           .cwiseMax(1e-12)
                           .cwiseMin(1.0);
                occt /= occt.maxCoeff();  // gauge: ||gamma|| = 1
            }
            Eigen::VectorXd thetat = theta;
            Eigen::VectorXd occ_full = occt;
            if (pairing) {
                thetat = (theta - step * e.grad_theta)
                             .cwiseMax(0.0)
                             .cwiseMin(std::numbers::pi / 2.0);
                if (trace_target > 0.0) {
                    Eigen::VectorXd lam(thetat.size());
                    for (int k = 0; k < lam.size(); ++k) {
                        const double s = std::sin(thetat[k]);
                        lam[k] = s * s;
                    }
                    lam = project_trace(lam, trace_target);
                    for (int k = 0; k < lam.size(); ++k)
                        thetat[k] = std::asin(std::sqrt(lam[k]));
                }
                Eigen::VectorXd lam(thetat.size());
                for (int k = 0; k < lam.size(); ++k) {
                    const double s = std::sin(thetat[k]);
                    lam[k] = s * s;
                }
                occ_full = duplicated_occupations(lam);
            }
            double ft;
            try {
                ft = evaluate(grid, Ut, occ_full, thetat, cfg.objective,
                              cfg.mass, cfg.kappa, tables, fft, false)
                         .f;
            } catch (const DegenerateDenominator&) {
                step *= 0.5;
                continue;
            }
            const double moved = (Ut - U).squaredNorm() +
                                 (relaxed ? (occt - occ).squaredNorm() : 0.0) +
                                 (pairing ? (thetat - theta).squaredNorm()
                                          : 0.0);
            if (ft <= e.f - 1e-4 / std::max(step, 1e-300) * moved &&
                moved > 0.0) {
                U = std::move(Ut);
                if (relaxed) occ = std::move(occt);
                if (pairing) {
                    theta = std::move(thetat);
                    occ = occ_full;
                }
                e.f = ft;
                step = std::min(step * 1.3, 1e6);
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            stop = "NonDecreasingStep";
            break;
        }

        if (renormalize) {
            // Kinetic trace for the accepted state on the current grid,
            // consumed by the relabel at the top of the next iteration.
            Field uh(U.rows());
            double t = 0.0;
            for (int j = 0; j < U.cols(); ++j) {
                fft.forward(U.col(j).data(), uh.data());
                t += occ[j] *
                     (uh.array().abs2() * tables.massless.array()).sum();
            }
            pending_kinetic = t;
        }
        out.gradient_norm = gnorm;
    }

    out.grid = grid;
    out.U = std::move(U);
    out.occ = std::move(occ);
    out.theta = std::move(theta);
    out.objective = e.f;
    out.iterations = it;
    out.converged = converged;
    out.stop_reason = stop;
    if (out.log.empty() || out.log.back().iteration != it)
        out.log.push_back({it, e.f, out.gradient_norm, step});
    return out;
}

OrbitalSet make_state(const EngineResult& r) {
    OrbitalSet s;
    s.grid = r.grid;
    s.orbitals = r.U;
    s.occupations = r.occ;
    return s;
}

}  // namespace

ObjectiveEval evaluate_objective(const OrbitalSet& state, ObjectiveKind kind,
                                 double mass, double kappa) {
    if (kind == ObjectiveKind::TFObjective)
        throw std::invalid_argument(
            "the radial objective is evaluated by tf_objective");
    if (is_pairing(kind))
        throw std::invalid_argument("pairing objectives need a PairingState");
    Fourier fft(state.grid.n);
    Tables tables;
    tables.refresh(state.grid, mass);
    Eval e = evaluate(state.grid, state.orbitals, state.occupations,
                      Eigen::VectorXd(), kind, mass, kappa, tables, fft,
                      true);
    ObjectiveEval out;
    out.value = e.f;
    out.orbital_gradient = std::move(e.grad);
    out.occupation_gradient = std::move(e.grad_occ);
    return out;
}

ObjectiveEval evaluate_objective(const PairingState& state, ObjectiveKind kind,
                                 double mass, double kappa) {
    if (!is_pairing(kind))
        throw std::invalid_argument(
            "orbital objectives evaluate on an OrbitalSet");
    const SpectralGrid& grid = state.frame.grid;
    Fourier fft(grid.n);
    Tables tables;
    tables.refresh(grid, mass);
    Eval e = evaluate(grid, state.frame.orbitals, state.occupations(),
                      state.pair_angles, kind, mass, kappa, tables, fft,
                      true);
    ObjectiveEval out;
    out.value = e.f;
    out.orbital_gradient = std::move(e.grad);
    out.angle_gradient = std::move(e.grad_theta);
    return out;
}

PairingState MinimizeResult::pairing_state() const {
    if (pair_angles.size() == 0)
        throw std::logic_error("result has no pairing block");
    PairingState p;
    p.frame.grid = state.grid;
    p.frame.orbitals = state.orbitals;
    p.frame.occupations = Eigen::VectorXd::Ones(state.orbitals.cols());
    p.pair_angles = pair_angles;
    return p;
}

Eigen::MatrixXcd apply_meanfield(const OrbitalSet& state, double kappa,
                                 double mass, Fourier& fft) {
    const SpectralGrid& grid = state.grid;
    const int N = state.count();
    const RealField kin =
        build_multiplier(grid, MultiplierSpec::kinetic(mass));
    const RealField coul = build_multiplier(grid, MultiplierSpec::coulomb());

    const DensityField rho = density(state);
    const Field phi =
        apply_multiplier(coul, rho.values.cast<Complex>(), fft);
    const RealField phir = phi.real();

    Eigen::MatrixXcd W(state.orbitals.rows(), N);
    Field tmp(state.orbitals.rows());
    std::vector<Field> pp(N * (N + 1) / 2);
    for (int j = 0; j < N; ++j)
        for (int k = j; k < N; ++k)
            pp[triangle_index(j, k, N)] = pair_potential(
                grid, state.orbitals.col(j), state.orbitals.col(k), coul,
                fft);
    for (int j = 0; j < N; ++j) {
        Field uh(state.orbitals.rows());
        fft.forward(state.orbitals.col(j).data(), uh.data());
        uh.array() *= kin.array();
        fft.backward(uh.data(), tmp.data());
        Field xop = Field::Zero(state.orbitals.rows());
        for (int k = 0; k < N; ++k) {
            const Field p = (j <= k)
                                ? pp[triangle_index(j, k, N)]
                                : pp[triangle_index(k, j, N)].conjugate();
            xop += state.occupations[k] *
                   p.cwiseProduct(state.orbitals.col(k));
        }
        W.col(j) = tmp -
                   kappa * phir.cast<Complex>().cwiseProduct(
                               state.orbitals.col(j)) +
                   kappa * xop;
    }
    return W;
}

EigenReport eigen_extract(OrbitalSet& state, double kappa, double mass,
                          Fourier& fft) {
    const int N = state.count();
    const Eigen::MatrixXcd W = apply_meanfield(state, kappa, mass, fft);
    Eigen::MatrixXcd A = state.orbitals.adjoint() * W;
    A = 0.5 * (A + A.adjoint()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(A);
    const Eigen::MatrixXcd V = es.eigenvectors();

    state.orbitals = (state.orbitals * V).eval();
    const Eigen::MatrixXcd WV = W * V;
    EigenReport rep;
    rep.eigenvalues = es.eigenvalues();
    rep.residuals.resize(N);
    for (int j = 0; j < N; ++j)
        rep.residuals[j] =
            (WV.col(j) - rep.eigenvalues[j] * state.orbitals.col(j)).norm();
    rep.sum = rep.eigenvalues.sum();
    const double scale = std::abs(rep.eigenvalues[N - 1]);
    rep.stationary = rep.residuals.maxCoeff() <= 1e-3 * std::max(scale, 1e-30);
    return rep;
}

MinimizeResult minimize(const OrbitalSet& initial, const MinimizeConfig& cfg) {
    switch (cfg.objective) {
        case ObjectiveKind::HFEnergy:
        case ObjectiveKind::QuotientHF:
        case ObjectiveKind::QuotientRelaxed:
            break;
        case ObjectiveKind::TFObjective:
            throw std::invalid_argument(
                "the radial objective is solved by solve_tf");
        default:
            throw std::invalid_argument(
                "pairing objectives need the PairingState overload");
    }
    if (cfg.objective == ObjectiveKind::QuotientHF) {
        for (int j = 0; j < initial.count(); ++j)
            if (std::abs(initial.occupations[j] - 1.0) > 1e-12)
                throw std::invalid_argument(
                    "HF quotient is over projections: occupations must be "
                    "1");
    }
    EngineResult r =
        descend(initial.grid, initial.orbitals, initial.occupations,
                Eigen::VectorXd(), cfg, 0.0);
    MinimizeResult out;
    out.state = make_state(r);
    out.gradient_norm = r.gradient_norm;
    out.iterations = r.iterations;
    out.converged = r.converged;
    out.stop_reason = std::move(r.stop_reason);
    out.log = std::move(r.log);
    // Score the returned state through the public functionals so the
    // reported value and the library evaluation agree exactly.
    Fourier fft(out.state.grid.n);
    switch (cfg.objective) {
        case ObjectiveKind::HFEnergy:
            out.objective =
                hf_energy(out.state, cfg.mass, cfg.kappa, fft).total;
            break;
        case ObjectiveKind::QuotientHF:
            out.objective =
                gn_quotient(out.state, QuotientVariant::HF, fft).value;
            break;
        default:
            out.objective =
                gn_quotient(out.state, QuotientVariant::RelaxedRank, fft)
                    .value;
            break;
    }
    return out;
}

MinimizeResult minimize(const PairingState& initial, const MinimizeConfig& cfg,
                        double trace_target) {
    if (!is_pairing(cfg.objective))
        throw std::invalid_argument(
            "PairingState minimization needs a pairing objective");
    const Admissibility adm = check_admissibility(initial);
    if (!adm.ok)
        throw std::invalid_argument("inadmissible initial pairing state");
    Eigen::VectorXd theta = initial.pair_angles;
    if (trace_target > 0.0) {
        if (trace_target > 2.0 * theta.size() + 1e-12)
            throw std::invalid_argument(
                "trace target exceeds the frame's pair capacity");
        Eigen::VectorXd lam(theta.size());
        for (int k = 0; k < lam.size(); ++k) {
            const double s = std::sin(theta[k]);
            lam[k] = s * s;
        }
        lam = project_trace(lam, trace_target);
        for (int k = 0; k < lam.size(); ++k)
            theta[k] = std::asin(std::sqrt(lam[k]));
    }
    Eigen::VectorXd occ(2 * theta.size());
    for (int k = 0; k < theta.size(); ++k) {
        const double s = std::sin(theta[k]);
        occ[2 * k] = occ[2 * k + 1] = s * s;
    }
    EngineResult r = descend(initial.frame.grid, initial.frame.orbitals, occ,
                             theta, cfg, trace_target);
    MinimizeResult out;
    out.state = make_state(r);
    out.pair_angles = std::move(r.theta);
    out.gradient_norm = r.gradient_norm;
    out.iterations = r.iterations;
    out.converged = r.converged;
    out.stop_reason = std::move(r.stop_reason);
    out.log = std::move(r.log);
    Fourier fft(out.state.grid.n);
    const PairingState ps = out.pairing_state();
    out.objective = (cfg.objective == ObjectiveKind::HFBEnergy)
                        ? hfb_energy(ps, cfg.mass, cfg.kappa, fft).total
                        : gn_quotient(ps, fft).value;
    return out;
}

OrbitalSet seed_state(const SpectralGrid& grid, int N, std::uint64_t seed) {
    SplitMix64 rng(seed * 0x9e3779b97f4a7c15ull + 0x2545f4914f6cdd1dull);
    const long n3 = grid.size();
    OrbitalSet s;
    s.grid = grid;
    s.orbitals.resize(n3, N);
    s.occupations = Eigen::VectorXd::Ones(N);

    // Monomial angular factors in graded order times a Gaussian envelope
    // whose width cycles with the seed; a small random perturbation breaks
    // accidental symmetries.
    std::vector<std::array<int, 3>> powers;
    for (int deg = 0; static_cast<int>(powers.size()) < N; ++deg)
        for (int a = deg; a >= 0 && static_cast<int>(powers.size()) < N; --a)
            for (int b = deg - a;
                 b >= 0 && static_cast<int>(powers.size()) < N; --b)
                powers.push_back({a, b, deg - a - b});

    const double width =
        grid.box_length * (0.10 + 0.035 * static_cast<double>(seed % 4));
    const int n = grid.n;
    for (int j = 0; j < N; ++j) {
        const auto [pa, pb, pc] = powers[j];
        const double jitter = 0.03;
        for (long i = 0; i < n3; ++i) {
            const double x = grid.coordinate(static_cast<int>(i / (n * n)));
            const double y = grid.coordinate(static_cast<int>((i / n) % n));
            const double z = grid.coordinate(static_cast<int>(i % n));
            const double r2 = x * x + y * y + z * z;
            const double poly = std::pow(x, pa) * std::pow(y, pb) *
                                std::pow(z, pc);
            const double env = std::exp(-r2 / (2.0 * width * width));
            s.orbitals(i, j) =
                Complex(poly * env * (1.0 + jitter * rng.normal()), 0.0);
        }
    }
    orthonormalize(s.orbitals);
    return s;
}

// Relabel so the massless kinetic trace is exactly one.
void renormalize_kinetic(OrbitalSet& state, Fourier& fft) {
    const double t =
        kinetic_trace(state, MultiplierSpec::massless(), fft);
    state = dilate(state, 1.0 / t);
}

CriticalCouplingResult solve_kappa_n(int N, const SpectralGrid& grid,
                                     MinimizeConfig cfg, int starts,
                                     const std::optional<OrbitalSet>& warm) {
    if (N < 2)
        throw std::invalid_argument(
            "order-1 critical coupling is infinite (rank-1 cancellation); "
            "need N >= 2");
    if (starts < 0 || (starts == 0 && !warm))
        throw std::invalid_argument(
            "need at least one start or a warm state");
    cfg.objective = ObjectiveKind::QuotientHF;
    CriticalCouplingResult out;
    out.N = N;

    // Starts are independent; extra workers run them concurrently with
    // per-run FFT plans. Results land in seed-ordered slots, so the output
    // is identical for any thread count.
    const std::size_t base = warm ? 1 : 0;
    std::vector<MinimizeResult> runs(base + static_cast<std::size_t>(starts));
    if (warm) {
        if (warm->count() != N)
            throw std::invalid_argument("warm start has wrong orbital count");
        runs[0] = minimize(*warm, cfg);
    }
    parallel_for(cfg.threads, starts, [&](long lo_s, long hi_s, int) {
        for (long s = lo_s; s < hi_s; ++s) {
            MinimizeConfig c = cfg;
            c.seed = cfg.seed + static_cast<std::uint64_t>(s);
            runs[base + static_cast<std::size_t>(s)] =
                minimize(seed_state(grid, N, c.seed), c);
        }
    });

    // Best value wins; ties within 1e-9 resolve to the earliest start
    // (warm first, then ascending seed).
    std::size_t best_at = 0;
    for (std::size_t i = 1; i < runs.size(); ++i)
        if (runs[i].objective < runs[best_at].objective - 1e-9) best_at = i;
    std::swap(runs[0], runs[best_at]);
    std::stable_sort(runs.begin() + 1, runs.end(),
                     [](const MinimizeResult& a, const MinimizeResult& b) {
                         return a.objective < b.objective;
                     });
    out.seeds = std::move(runs);
    MinimizeResult& best = out.seeds.front();
    out.converged = best.converged;

    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& r : out.seeds)
        if (r.converged) {
            lo = std::min(lo, r.objective);
            hi = std::max(hi, r.objective);
        }
    out.multistart_spread = (hi >= lo) ? hi - lo : 0.0;

    Fourier fft(best.state.grid.n);
    OrbitalSet opt = best.state;
    renormalize_kinetic(opt, fft);
    out.kappa = gn_quotient(opt, QuotientVariant::HF, fft).value;

    out.eigen = eigen_extract(opt, out.kappa, 0.0, fft);
    const double t = kinetic_trace(opt, MultiplierSpec::massless(), fft);
    const double d = direct_term(density(opt), fft);
    const double x = exchange_term(opt, fft);
    out.virial_residual = std::abs(t - 0.5 * out.kappa * (d - x)) / t;
    out.pohozaev_residual =
        std::abs(t - 1.25 * out.kappa * (d - x) - 1.5 * out.eigen.sum) / t;
    out.d_star_raw = inverse_sqrt_trace(opt, fft, &out.d_star_bias);
    out.d_star = out.d_star_raw + out.d_star_bias;
    out.optimizer = opt;

    // Confinement sensitivity: fixed-box re-solve at 1.5 L, warm-started.
    {
        MinimizeConfig confine = cfg;
        confine.box_adaptation = BoxAdaptation::Off;
        confine.max_iterations = std::min(cfg.max_iterations, 400);
        const OrbitalSet wide = dilate(opt, 1.0 / 1.5);
        const MinimizeResult wide_run = minimize(wide, confine);
        out.confinement_error =
            std::abs(wide_run.objective - out.kappa) / out.kappa;
    }
    return out;
}

HFSolveResult solve_hf_energy(int N, double mass, double kappa,
                              double kappa_n_value, const SpectralGrid& grid,
                              MinimizeConfig cfg,
                              const std::optional<OrbitalSet>& warm) {
    if (!(mass > 0.0)) throw std::invalid_argument("mass must be > 0");
    if (!(kappa > 0.0)) throw std::invalid_argument("coupling must be > 0");
    if (kappa >= kappa_n_value)
        throw std::invalid_argument(
            "no ground state at or above the order-N critical coupling; "
            "the infimum is -mN (unattained) at the boundary and -inf "
            "beyond");
    cfg.objective = ObjectiveKind::HFEnergy;
    cfg.mass = mass;
    cfg.kappa = kappa;

    HFSolveResult out;
    OrbitalSet state = warm ? *warm : seed_state(grid, N, cfg.seed);
    Fourier fft(state.grid.n);

    // Virial restarts: exact dilation line search on the cached spectra,
    // then relabel and re-minimize until the equilibrating dilation is 1.
    for (int restart = 0; restart <= 3; ++restart) {
        out.min = minimize(state, cfg);
        state = out.min.state;

        Eigen::MatrixXcd uhat(state.orbitals.rows(), state.count());
        for (int j = 0; j < state.count(); ++j)
            fft.forward(state.orbitals.col(j).data(), uhat.col(j).data());
        const RealField xi =
            build_multiplier(state.grid, MultiplierSpec::massless());
        const double den = direct_term(density(state), fft) -
                           exchange_term(state, fft);
        auto dE = [&](double beta) {
            double s = 0.0;
            for (int j = 0; j < state.count(); ++j) {
                const double w = state.occupations[j];
                s += w * (uhat.col(j).array().abs2() * beta *
                          xi.array().square() /
                          (beta * beta * xi.array().square() +
                           mass * mass)
                              .sqrt())
                         .sum();
            }
            return s - 0.5 * kappa * den;
        };
        if (dE(1e6) <= 0.0) {
            out.min.converged = false;
            out.min.stop_reason = "dilation unbounded";
            break;
        }
        double lo = 0.0, hi = 1e6;
        for (int bit = 0; bit < 200; ++bit) {
            const double mid = 0.5 * (lo + hi);
            (dE(mid) < 0.0 ? lo : hi) = mid;
        }
        // Clamp the per-restart relabel so a transient spectrum cannot
        // teleport the box.
        const double beta = std::clamp(0.5 * (lo + hi), 0.125, 8.0);
        if (std::abs(beta - 1.0) <= 1e-6 || restart == 3) break;
        state = dilate(state, beta);
        out.box_restarts = restart + 1;
    }

    // Grow the box until the converged density is confined.
    for (int grow = 0; grow < 3; ++grow) {
        const DensityField rho = density(state);
        const double quarter = state.grid.box_length / 4.0;
        double outside = 0.0, total = 0.0;
        const double h3 = state.grid.cell_volume();
        for (long i = 0; i < rho.values.size(); ++i) {
            const double m = rho.values[i] * h3;
            total += m;
            if (state.grid.radius2(i) > quarter * quarter) outside += m;
        }
        out.tail_mass = outside / total;
        if (out.tail_mass < 1e-6) break;
        state = dilate(state, 1.0 / 1.5);
        out.min = minimize(state, cfg);
        state = out.min.state;
        ++out.box_restarts;
    }

    out.min.state = state;
    out.energy = hf_energy(state, mass, kappa, fft);
    out.min.objective = out.energy.total;
    return out;
}

}  // namespace relstar
