#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <iostream>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "relstar/analysis.hpp"
#include "relstar/checks.hpp"
#include "relstar/io_util.hpp"
#include "relstar/minimize.hpp"
#include "relstar/radial.hpp"

namespace {

using nlohmann::json;
using namespace relstar;

constexpr const char* kVersion = "1.0.0";

// exit-code contract: 0 success, 1 usage, 2 numerical non-convergence,
// 3 internal invariant violation
enum ExitCode : int {
    kOk = 0,
    kUsage = 1,
    kUnconverged = 2,
    kInvariant = 3
};

json provenance(const std::map<std::string, std::string>& params) {
    json p;
    p["artifact_version"] = kVersion;
    p["config_hash"] = config_hash_hex(params);
    p["parameters"] = params;
    return p;
}

std::string param(double v) { return csv_field(v); }
std::string param(int v) { return std::to_string(v); }
std::string param(std::uint64_t v) { return std::to_string(v); }

void emit(const std::filesystem::path& path, const std::string& text) {
    write_file(path.string(), text);
}

void emit_json(const std::filesystem::path& path, const json& j) {
    emit(path, j.dump(2) + "\n");
}

json fit_json(const RateFit& f) {
    json j;
    j["exponent"] = json_number(f.exponent);
    j["prefactor"] = json_number(f.prefactor);
    j["r_squared"] = json_number(f.r_squared);
    j["points"] = f.points;
    return j;
}

json table_json(const ScanTable& t) {
    json j;
    j["columns"] = t.columns;
    json rows = json::array();
    for (const auto& r : t.rows) {
        json row = json::array();
        for (double v : r) row.push_back(json_number(v));
        rows.push_back(row);
    }
    j["rows"] = rows;
    j["metadata"] = t.metadata;
    return j;
}

std::string iterates_csv(const std::vector<IterateRecord>& log) {
    std::string out = csv_row({"iteration", "objective", "gradient_norm",
                               "step"});
    for (const auto& r : log)
        out += csv_row({std::to_string(r.iteration), csv_field(r.objective),
                        csv_field(r.gradient_norm), csv_field(r.step)});
    return out;
}

std::vector<double> parse_list(const std::string& text) {
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t comma = text.find(',', pos);
        const std::string tok =
            text.substr(pos, comma == std::string::npos ? std::string::npos
                                                        : comma - pos);
        if (!tok.empty()) out.push_back(std::stod(tok));
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    if (out.empty()) throw std::invalid_argument("empty list: " + text);
    return out;
}

struct GlobalOpts {
    int grid = 32;
    double box = 24.0;
    int seeds = 4;
    int iters = 5000;
    double gtol = 1e-6;
    std::uint64_t seed = 1;
    int threads = 0;
    std::string out = ".";
    std::string config;
    bool gtol_explicit = false;
};

MinimizeConfig base_config(const GlobalOpts& g) {
    MinimizeConfig cfg;
    cfg.max_iterations = g.iters;
    cfg.gradient_tolerance = g.gtol;
    cfg.seed = g.seed;
    cfg.threads = resolve_threads(g.threads);
    return cfg;
}

void common_params(std::map<std::string, std::string>& p,
                   const GlobalOpts& g) {
    p["grid"] = param(g.grid);
    p["box"] = param(g.box);
    p["seeds"] = param(g.seeds);
    p["iters"] = param(g.iters);
    p["gtol"] = param(g.gtol);
    p["seed"] = param(g.seed);
    p["threads"] = param(resolve_threads(g.threads));
}

json critical_json(const CriticalCouplingResult& r) {
    json j;
    j["N"] = r.N;
    j["kappa"] = json_number(r.kappa);
    j["kappa_scaled"] = json_number(r.kappa * std::pow(r.N, 2.0 / 3.0));
    j["converged"] = r.converged;
    j["multistart_spread"] = json_number(r.multistart_spread);
    j["virial_residual"] = json_number(r.virial_residual);
    j["pohozaev_residual"] = json_number(r.pohozaev_residual);
    j["d_star"] = json_number(r.d_star);
    j["d_star_raw"] = json_number(r.d_star_raw);
    j["d_star_bias"] = json_number(r.d_star_bias);
    j["confinement_error"] = json_number(r.confinement_error);
    json ev = json::array();
    for (int i = 0; i < r.eigen.eigenvalues.size(); ++i)
        ev.push_back(json_number(r.eigen.eigenvalues[i]));
    j["eigenvalues"] = ev;
    j["eigenvalue_sum"] = json_number(r.eigen.sum);
    j["stationary"] = r.eigen.stationary;
    json seeds = json::array();
    for (const auto& s : r.seeds) {
        json e;
        e["objective"] = json_number(s.objective);
        e["converged"] = s.converged;
        e["iterations"] = s.iterations;
        e["stop_reason"] = s.stop_reason;
        seeds.push_back(e);
    }
    j["starts"] = seeds;
    return j;
}

int run_kappa_n(const GlobalOpts& g, int N) {
    std::map<std::string, std::string> p;
    p["command"] = "kappa-n";
    p["N"] = param(N);
    common_params(p, g);

    const SpectralGrid grid = SpectralGrid::cubic(g.grid, g.box);
    const CriticalCouplingResult r =
        solve_kappa_n(N, grid, base_config(g), g.seeds);

    const std::filesystem::path dir(g.out);
    std::filesystem::create_directories(dir);
    const std::string stem = "kappa_n_N" + std::to_string(N);
    json j;
    j["command"] = "kappa-n";
    j["provenance"] = provenance(p);
    j["result"] = critical_json(r);
    emit_json(dir / (stem + ".json"), j);
    save_checkpoint((dir / (stem + ".state")).string(), r.optimizer, 0.0,
                    r.kappa);
    emit(dir / (stem + "_iterates.csv"),
         iterates_csv(r.seeds.front().log));
    std::cout << "kappa_" << N << " = " << csv_field(r.kappa)
              << (r.converged ? "" : "  [unconverged]") << "\n";
    return r.converged ? kOk : kUnconverged;
}

int run_tf_tau(const GlobalOpts& g, int nodes, bool refine) {
    std::map<std::string, std::string> p;
    p["command"] = "tf-tau";
    p["nodes"] = param(nodes);
    p["refine"] = refine ? "1" : "0";
    common_params(p, g);

    MinimizeConfig cfg = base_config(g);
    cfg.objective = ObjectiveKind::TFObjective;
    // The radial descent measures first-order error in the square-root
    // variable; its floor on a logarithmic grid sits near 1e-4, so the
    // shared default would spin without converging.
    if (!g.gtol_explicit) cfg.gradient_tolerance = 3e-4;
    p["gtol"] = param(cfg.gradient_tolerance);
    const TFResult r = solve_tf(cfg, nodes, refine);

    const std::filesystem::path dir(g.out);
    std::filesystem::create_directories(dir);
    json j;
    j["command"] = "tf-tau";
    j["provenance"] = provenance(p);
    j["tau_c"] = json_number(r.value);
    j["refinement_delta"] = json_number(r.refinement_delta);
    j["converged"] = r.converged;
    j["tail_monotone"] = r.tail_monotone;
    j["iterations"] = r.iterations;
    emit_json(dir / "tf_tau.json", j);
    std::string csv = csv_row({"r", "f"});
    for (int i = 0; i < r.grid.count(); ++i)
        csv += csv_row({csv_field(r.grid.radii[i]),
                        csv_field(r.minimizer[i])});
    emit(dir / "tf_profile.csv", csv);
    std::cout << "tau_c = " << csv_field(r.value)
              << (r.converged ? "" : "  [unconverged]") << "\n";
    return r.converged ? kOk : kUnconverged;
}

int run_blowup(const GlobalOpts& g, int N, double mass,
               const std::string& fractions) {
    std::map<std::string, std::string> p;
    p["command"] = "blowup";
    p["N"] = param(N);
    p["m"] = param(mass);
    p["fractions"] = fractions;
    common_params(p, g);

    const SpectralGrid grid = SpectralGrid::cubic(g.grid, g.box);
    MinimizeConfig cfg = base_config(g);
    const CriticalCouplingResult crit = solve_kappa_n(N, grid, cfg, g.seeds);
    const BlowupScan scan =
        blowup_scan(N, mass, parse_list(fractions), grid, cfg, crit);

    const std::filesystem::path dir(g.out);
    std::filesystem::create_directories(dir);
    const std::string stem = "blowup_N" + std::to_string(N);
    json j;
    j["command"] = "blowup";
    j["provenance"] = provenance(p);
    j["kappa_n"] = json_number(scan.kappa_n);
    j["kappa_n_converged"] = crit.converged;
    j["gap_fit"] = fit_json(scan.gap_fit);
    j["epsilon_fit"] = fit_json(scan.epsilon_fit);
    j["prefactor_ratio"] = json_number(scan.prefactor_ratio);
    j["excluded_rows"] = scan.excluded;
    j["table"] = table_json(scan.table);
    emit_json(dir / (stem + ".json"), j);
    emit(dir / (stem + ".csv"), scan.table.csv());
    std::cout << "gap exponent " << csv_field(scan.gap_fit.exponent)
              << ", scale exponent " << csv_field(scan.epsilon_fit.exponent)
              << ", prefactor ratio " << csv_field(scan.prefactor_ratio)
              << "\n";
    return crit.converged ? kOk : kUnconverged;
}

int run_hfb_scale(const GlobalOpts& g, double beta_max, int pairs,
                  double mass, double kappa) {
    std::map<std::string, std::string> p;
    p["command"] = "hfb-scale";
    p["beta-max"] = param(beta_max);
    p["pairs"] = param(pairs);
    p["m"] = param(mass);
    p["kappa"] = param(kappa);
    common_params(p, g);

    if (beta_max < 1.0)
        throw std::invalid_argument("--beta-max must be at least 1");
    const SpectralGrid grid = SpectralGrid::cubic(g.grid, g.box);
    PairingState state;
    state.frame = seed_state(grid, 2 * pairs, g.seed);
    state.pair_angles =
        Eigen::VectorXd::Constant(pairs, std::numbers::pi / 4.0);

    std::vector<double> betas;
    for (double b = 1.0; b <= beta_max * (1.0 + 1e-12); b *= 2.0)
        betas.push_back(b);
    const ScanTable table =
        hfb_scaling_trajectory(state, mass, kappa, betas);

    // slope of the decaying part of the gap trace over the asymptotic
    // rows; the zero-mode floor never decays and is reported separately
    std::vector<double> xs, ys;
    for (const auto& row : table.rows)
        if (row[0] >= 4.0) {
            xs.push_back(row[0]);
            ys.push_back(row[table.column("gap_bulk")]);
        }
    const RateFit fit = fit_rate(xs, ys);
    double worst = 0.0;
    for (const auto& row : table.rows)
        worst = std::max(worst, row[table.column("identity_residual")]);

    const std::filesystem::path dir(g.out);
    std::filesystem::create_directories(dir);
    json j;
    j["command"] = "hfb-scale";
    j["provenance"] = provenance(p);
    j["gap_slope"] = fit_json(fit);
    j["zero_mode_floor"] = json_number(std::stod(table.metadata.at("zero_mode_floor")));
    j["max_identity_residual"] = json_number(worst);
    j["table"] = table_json(table);
    emit_json(dir / "hfb_scale.json", j);
    emit(dir / "hfb_scale.csv", table.csv());
    std::cout << "gap slope " << csv_field(fit.exponent)
              << ", max identity residual " << csv_field(worst) << "\n";
    return kOk;
}

int run_classify(const GlobalOpts& g, double kappa, int max_order) {
    std::map<std::string, std::string> p;
    p["command"] = "classify";
    p["kappa"] = param(kappa);
    p["max-order"] = param(max_order);
    common_params(p, g);

    if (max_order < 2)
        throw std::invalid_argument("--max-order must be at least 2");
    const SpectralGrid grid = SpectralGrid::cubic(g.grid, g.box);
    MinimizeConfig cfg = base_config(g);
    std::vector<ThresholdEntry> table;
    bool all_converged = true;
    json thresholds = json::array();
    for (int N = 2; N <= max_order; ++N) {
        const CriticalCouplingResult r = solve_kappa_n(N, grid, cfg, g.seeds);
        table.push_back({N, r.kappa, r.confinement_error});
        all_converged = all_converged && r.converged;
        json e;
        e["N"] = N;
        e["kappa_n"] = json_number(r.kappa);
        e["confinement_error"] = json_number(r.confinement_error);
        e["converged"] = r.converged;
        thresholds.push_back(e);
    }
    const KappaClassification c = classify_kappa(kappa, table);

    const std::filesystem::path dir(g.out);
    std::filesystem::create_directories(dir);
    json j;
    j["command"] = "classify";
    j["provenance"] = provenance(p);
    j["kappa"] = json_number(kappa);
    j["max_stable"] = c.max_stable;
    j["at_boundary"] = c.at_boundary;
    j["boundary_N"] = c.boundary_N;
    j["margin"] = json_number(c.margin);
    j["thresholds"] = thresholds;
    emit_json(dir / "classify.json", j);
    std::cout << "largest stable order " << c.max_stable
              << (c.at_boundary ? " (at resolution boundary)" : "") << "\n";
    return all_converged ? kOk : kUnconverged;
}

int run_check(const GlobalOpts& g) {
    const std::vector<CheckResult> results = run_check_suite();
    const std::filesystem::path dir(g.out);
    std::filesystem::create_directories(dir);
    json arr = json::array();
    int failures = 0;
    for (const auto& r : results) {
        json e;
        e["name"] = r.name;
        e["pass"] = r.pass;
        e["detail"] = r.detail;
        arr.push_back(e);
        if (!r.pass) {
            ++failures;
            std::cout << "FAIL " << r.name << ": " << r.detail << "\n";
        }
    }
    std::map<std::string, std::string> p;
    p["command"] = "check";
    json j;
    j["command"] = "check";
    j["provenance"] = provenance(p);
    j["checks"] = arr;
    j["failures"] = failures;
    emit_json(dir / "check_report.json", j);
    std::cout << (results.size() - failures) << "/" << results.size()
              << " checks passed\n";
    return failures == 0 ? kOk : kInvariant;
}

// Flat key=value config support: tokens are injected after the subcommand
// name so explicit command-line values, parsed later, win.
std::vector<std::string> inject_config(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    std::string path;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
        else if (args[i].rfind("--config=", 0) == 0)
            path = args[i].substr(9);
    }
    if (path.empty()) return args;
    const auto kv = parse_config_text(read_file(path));
    std::vector<std::string> tokens;
    for (const auto& [k, v] : kv) tokens.push_back("--" + k + "=" + v);
    // insert after the first non-flag token (the subcommand) if present
    std::size_t at = 0;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i].rfind("--", 0) != 0) {
            at = i + 1;
            break;
        }
    }
    args.insert(args.begin() + at, tokens.begin(), tokens.end());
    return args;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "relstar: variational toolkit for pseudo-relativistic fermion "
        "ground states"};
    app.fallthrough();
    // config-file tokens are injected before explicit flags; the last
    // occurrence wins, so the command line overrides the file
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    GlobalOpts g;
    app.add_option("--grid", g.grid, "grid points per axis")
        ->capture_default_str();
    app.add_option("--box", g.box, "box side length")->capture_default_str();
    app.add_option("--seeds", g.seeds, "multistart count")
        ->capture_default_str();
    app.add_option("--iters", g.iters, "iteration budget per solve")
        ->capture_default_str();
    app.add_option("--gtol", g.gtol, "gradient tolerance")
        ->capture_default_str();
    app.add_option("--seed", g.seed, "base random seed")
        ->capture_default_str();
    app.add_option("--threads", g.threads,
                   "worker cap; 0 defers to RELSTAR_THREADS, then 1")
        ->capture_default_str();
    app.add_option("--out", g.out, "output directory")
        ->capture_default_str();
    app.add_option("--config", g.config,
                   "flat key=value file; keys are these flag names");

    int kn_N = 2;
    auto* kn = app.add_subcommand(
        "kappa-n", "critical coupling of the order-N concentration quotient");
    kn->add_option("--N", kn_N, "orbital count")->required();

    int tf_nodes = 2048;
    bool tf_refine = true;
    auto* tf = app.add_subcommand(
        "tf-tau", "semiclassical variational constant on the radial grid");
    tf->add_option("--nodes", tf_nodes, "radial node count")
        ->capture_default_str();
    tf->add_flag("--refine,!--no-refine", tf_refine,
                 "re-solve at doubled resolution and report the delta")
        ->capture_default_str();

    int bl_N = 2;
    double bl_m = 1.0;
    std::string bl_fractions = "0.9,0.925,0.95,0.975,0.99,0.995";
    auto* bl = app.add_subcommand(
        "blowup", "near-critical ground-state chain and rate fits");
    bl->add_option("--N", bl_N, "orbital count")->capture_default_str();
    bl->add_option("--m", bl_m, "fermion mass")->capture_default_str();
    bl->add_option("--fractions", bl_fractions,
                   "comma list of kappa / kappa_N values")
        ->capture_default_str();

    double hs_beta_max = 64.0, hs_m = 1.0, hs_kappa = 1.0;
    int hs_pairs = 2;
    auto* hs = app.add_subcommand(
        "hfb-scale", "mass-gap decomposition along the dilation flow");
    hs->add_option("--beta-max", hs_beta_max, "largest dilation factor")
        ->capture_default_str();
    hs->add_option("--pairs", hs_pairs, "BCS pair count")
        ->capture_default_str();
    hs->add_option("--m", hs_m, "fermion mass")->capture_default_str();
    hs->add_option("--kappa", hs_kappa, "coupling")->capture_default_str();

    double cl_kappa = 0.0;
    int cl_max_order = 4;
    auto* cl = app.add_subcommand(
        "classify", "largest stable order for a given coupling");
    cl->add_option("--kappa", cl_kappa, "coupling to classify")->required();
    cl->add_option("--max-order", cl_max_order, "largest order to tabulate")
        ->capture_default_str();

    auto* ck = app.add_subcommand("check", "deterministic invariant suite");

    app.require_subcommand(1);

    std::vector<std::string> args;
    try {
        args = inject_config(argc, argv);
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kUsage;
    }
    try {
        // CLI11 parses the reversed token list
        std::vector<std::string> rev(args.rbegin(), args.rend());
        app.parse(rev);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }
    g.gtol_explicit = app.count("--gtol") > 0;

    try {
        if (*kn) return run_kappa_n(g, kn_N);
        if (*tf) return run_tf_tau(g, tf_nodes, tf_refine);
        if (*bl) return run_blowup(g, bl_N, bl_m, bl_fractions);
        if (*hs)
            return run_hfb_scale(g, hs_beta_max, hs_pairs, hs_m, hs_kappa);
        if (*cl) return run_classify(g, cl_kappa, cl_max_order);
        if (*ck) return run_check(g);
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kUsage;
    } catch (const std::out_of_range& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUnconverged;
    }
    return kUsage;
}
