#include <doctest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>

#include <json.hpp>

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

const char* cli_path() { return RELSTAR_CLI_PATH; }

int run(const std::string& args) {
    const std::string cmd =
        std::string(cli_path()) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

// fast deterministic solve used by most cases below
const std::string kTinySolve =
    "kappa-n --N 2 --grid 12 --box 14 --seeds 1 --iters 80 --gtol 1e-12";

}  // namespace

TEST_CASE("usage errors exit with code 1") {
    CHECK(run("") == 1);
    CHECK(run("no-such-command") == 1);
    CHECK(run("kappa-n") == 1);            // --N is required
    CHECK(run("kappa-n --N 1") == 1);      // order 1 has no finite coupling
    CHECK(run("classify --kappa -2 --max-order 2 --grid 8 --box 8") == 1);
    CHECK(run("--help") == 0);
}

TEST_CASE("kappa-n writes its three artifacts") {
    const fs::path dir = fresh_dir("relstar_cli_smoke");
    const int code = run(kTinySolve + " --out " + dir.string());
    CHECK((code == 0 || code == 2));  // the tiny budget may stop early

    const json j = json::parse(slurp(dir / "kappa_n_N2.json"));
    CHECK(j["result"]["N"] == 2);
    CHECK(j["result"]["kappa"].is_number());
    CHECK(double(j["result"]["kappa"]) > 0.0);
    CHECK(j["provenance"]["parameters"]["grid"] == "12");
    CHECK(j["provenance"]["config_hash"].is_string());
    CHECK(fs::exists(dir / "kappa_n_N2.state"));

    const std::string csv = slurp(dir / "kappa_n_N2_iterates.csv");
    CHECK(csv.rfind("iteration,objective,gradient_norm,step\r\n", 0) == 0);
}

TEST_CASE("identical configurations reproduce outputs bit for bit") {
    const fs::path a = fresh_dir("relstar_cli_det_a");
    const fs::path b = fresh_dir("relstar_cli_det_b");
    (void)run(kTinySolve + " --out " + a.string());
    (void)run(kTinySolve + " --out " + b.string());

    for (const char* name :
         {"kappa_n_N2.json", "kappa_n_N2.state", "kappa_n_N2_iterates.csv"}) {
        CAPTURE(name);
        const std::string fa = slurp(a / name);
        CHECK_FALSE(fa.empty());
        CHECK(fa == slurp(b / name));
    }

    // idempotent in its own output directory too
    (void)run(kTinySolve + " --out " + a.string());
    CHECK(slurp(a / "kappa_n_N2.json") == slurp(b / "kappa_n_N2.json"));
}

TEST_CASE("config files carry flat flag assignments") {
    const fs::path dir = fresh_dir("relstar_cli_cfg");
    const fs::path cfg = dir / "run.cfg";
    {
        std::ofstream out(cfg);
        out << "# comment line\n";
        out << "grid=12\n";
        out << "box=14\n";
        out << "seeds=1\n";
        out << "iters=80\n";
        out << "gtol=1e-12\n";
        out << "N=2\n";
    }
    const int code = run("kappa-n --config " + cfg.string() + " --out " +
                         dir.string());
    CHECK((code == 0 || code == 2));
    const json j = json::parse(slurp(dir / "kappa_n_N2.json"));
    CHECK(j["provenance"]["parameters"]["grid"] == "12");

    // explicit flags win over the file
    const fs::path dir2 = fresh_dir("relstar_cli_cfg2");
    (void)run("kappa-n --config " + cfg.string() + " --grid 8 --box 10 " +
              "--out " + dir2.string());
    const json j2 = json::parse(slurp(dir2 / "kappa_n_N2.json"));
    CHECK(j2["provenance"]["parameters"]["grid"] == "8");
}

TEST_CASE("tf-tau emits the constant and its profile") {
    const fs::path dir = fresh_dir("relstar_cli_tf");
    const int code =
        run("tf-tau --nodes 512 --no-refine --iters 4000 --gtol 3e-4 "
            "--out " +
            dir.string());
    CHECK(code == 0);
    const json j = json::parse(slurp(dir / "tf_tau.json"));
    const double tau = j["tau_c"];
    CHECK(tau > 2.5);
    CHECK(tau < 2.9);
    CHECK(j["converged"] == true);
    CHECK(slurp(dir / "tf_profile.csv").rfind("r,f\r\n", 0) == 0);
}

TEST_CASE("hfb-scale reports the identity residual and slope") {
    const fs::path dir = fresh_dir("relstar_cli_hfb");
    const int code = run(
        "hfb-scale --beta-max 16 --pairs 2 --grid 12 --box 10 --out " +
        dir.string());
    CHECK(code == 0);
    const json j = json::parse(slurp(dir / "hfb_scale.json"));
    CHECK(double(j["max_identity_residual"]) <= 1e-12);
    CHECK(j["table"]["rows"].size() == 5);  // beta = 1, 2, 4, 8, 16
}

TEST_CASE("json encodes non-finite values as strings") {
    // provenance hashing plus json_number cover this; a direct probe of the
    // emitted files: every numeric field parses as a finite double or is
    // one of the sentinel strings.
    const fs::path dir = fresh_dir("relstar_cli_finite");
    (void)run(kTinySolve + " --out " + dir.string());
    const json j = json::parse(slurp(dir / "kappa_n_N2.json"));
    std::function<void(const json&)> walk = [&](const json& node) {
        if (node.is_number()) {
            CHECK(std::isfinite(double(node)));
        } else if (node.is_string()) {
            // sentinels allowed
        } else if (node.is_object() || node.is_array()) {
            for (const auto& child : node) walk(child);
        }
    };
    walk(j);
}
