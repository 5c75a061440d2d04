#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "json_schema_check.hpp"
#include "mfgkit/cli.hpp"
#include "mfgkit/errors.hpp"
#include "mfgkit/parallel.hpp"

using namespace mfgkit;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "mfgkit_cli" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

json load_json(const fs::path& p) {
    std::ifstream f(p);
    REQUIRE(f.good());
    return json::parse(f);
}

json schema() {
    static json s = load_json(fs::path(__FILE__).parent_path().parent_path() / "schemas" /
                              "summary.schema.json");
    return s;
}

void check_summary_schema(const fs::path& summary_path) {
    const auto doc = load_json(summary_path);
    const std::string err = mfgkit_test::validate_schema(schema(), doc);
    INFO(err);
    CHECK(err.empty());
}

json quadratic_solve_config(const fs::path& out) {
    return json{
        {"model", {{"name", "quadratic"}}},
        {"numerics",
         {{"damping", 1.0}, {"tol", 1e-4}, {"max_iter", 10}, {"nt", 50}, {"nx", 101},
          {"bounds", {{-4.0, 4.0}}}, {"n_particles", 100}}},
        {"initial", {{"generator", "gaussian"}, {"mean", {0.5}}, {"sd", 0.5}, {"n", 100}}},
        {"output_dir", out.string()},
        {"seed", 3}};
}

}  // namespace

TEST_CASE("solve command: constant map reports one iteration") {
    const auto out = fresh_dir("solve_quadratic");
    const int rc = run_command("solve", quadratic_solve_config(out), {});
    CHECK(rc == 0);
    const auto summary = load_json(out / "summary.json");
    CHECK(summary["results"]["iterations"] == 1);
    CHECK(summary["verdicts"]["converged"] == true);
    CHECK(fs::exists(out / "residual_history.csv"));
    CHECK(fs::exists(out / "flow" / "manifest.json"));
    CHECK(fs::exists(out / "value" / "manifest.json"));
    check_summary_schema(out / "summary.json");
}

TEST_CASE("solve command: non-convergence exits 2") {
    const auto out = fresh_dir("solve_nonconv");
    auto cfg = quadratic_solve_config(out);
    cfg["model"] = {{"name", "lq_mean"}, {"params", {{"a", 0.5}}}};
    cfg["numerics"]["max_iter"] = 1;
    cfg["numerics"]["tol"] = 1e-14;
    cfg["numerics"]["bounds"] = {{-5.0, 6.0}};
    cfg["initial"]["mean"] = {2.0};
    const int rc = run_command("solve", cfg, {});
    CHECK(rc == 2);
    const auto summary = load_json(out / "summary.json");
    CHECK(summary["verdicts"]["converged"] == false);
    check_summary_schema(out / "summary.json");
}

TEST_CASE("check-monotone on convolution_terminal: dichotomy verdicts, exit 0") {
    const auto out = fresh_dir("monotone_conv");
    const json cfg = {
        {"model", {{"name", "convolution_terminal"}, {"params", {{"C", 1.0}, {"c", 0.5}}}}},
        {"monotone",
         {{"checks", {"displacement_g", "lasry_lions"}}, {"n", 200}, {"trials", 100}}},
        {"output_dir", out.string()},
        {"seed", 11}};
    const int rc = run_command("check-monotone", cfg, {});
    CHECK(rc == 0);  // audit completed; verdicts live in the summary
    const auto summary = load_json(out / "summary.json");
    CHECK(summary["verdicts"]["displacement_g"] == "pass");
    CHECK(summary["verdicts"]["lasry_lions"] == "fail");
    CHECK(fs::exists(out / "witness_lasry_lions.csv"));
    check_summary_schema(out / "summary.json");
}

TEST_CASE("stability command: lq_mean a=0 translated initials") {
    const auto out = fresh_dir("stability_lq");
    const json cfg = {
        {"model", {{"name", "lq_mean"}, {"params", {{"a", 0.0}}}}},
        {"numerics",
         {{"damping", 1.0}, {"tol", 1e-4}, {"max_iter", 20}, {"nt", 100}, {"nx", 201},
          {"bounds", {{-6.0, 8.0}}}}},
        {"initial",
         {{"generator", "gaussian"}, {"mean", {2.0}}, {"sd", 0.5}, {"n", 300},
          {"center_exact", true}}},
        {"initial2", {{"translate", {1.0}}}},
        {"output_dir", out.string()},
        {"plots", true},
        {"seed", 5}};
    const int rc = run_command("stability", cfg, {});
    CHECK(rc == 0);
    REQUIRE(fs::exists(out / "w2_curve.csv"));
    CHECK(fs::exists(out / "pairing_curve.csv"));
    CHECK(fs::exists(out / "w2_curve.svg"));

    // terminal W2 from the closed-form characteristics: delta/(1+T) = 0.5
    std::ifstream f(out / "w2_curve.csv");
    std::string line, last;
    std::getline(f, line);  // header
    while (std::getline(f, line))
        if (!line.empty()) last = line;
    const double w2_terminal = std::stod(last.substr(last.find(',') + 1));
    CHECK(w2_terminal == doctest::Approx(0.5).epsilon(0.04));
    check_summary_schema(out / "summary.json");
}

TEST_CASE("check-monotone: second_order opt-in and L/H checks") {
    const auto out = fresh_dir("monotone_dm");
    const json cfg = {
        {"model", {{"name", "displacement_model"}, {"params", {{"C0", 1.0}, {"eps", 0.1}}}}},
        {"monotone",
         {{"checks", {"displacement_L", "displacement_H", "second_order"}}, {"n", 24},
          {"trials", 6}}},
        {"output_dir", out.string()},
        {"seed", 2}};
    CHECK(run_command("check-monotone", cfg, {}) == 0);
    const auto summary = load_json(out / "summary.json");
    CHECK(summary["verdicts"]["displacement_H"] == "pass");
    CHECK(summary["verdicts"]["second_order"] == "pass");
    CHECK(fs::exists(out / "witness_second_order.csv"));
    check_summary_schema(out / "summary.json");
}

TEST_CASE("convergence command on the lq_mean terminal-mean ladder") {
    const auto out = fresh_dir("convergence_lq");
    const json cfg = {
        {"model", {{"name", "lq_mean"}, {"params", {{"a", 0.5}}}}},
        {"numerics",
         {{"damping", 1.0}, {"tol", 1e-4}, {"max_iter", 20}, {"nt", 25}, {"nx", 101},
          {"bounds", {{-6.0, 8.0}}}}},
        {"initial",
         {{"generator", "gaussian"}, {"mean", {2.0}}, {"sd", 0.5}, {"n", 200},
          {"center_exact", true}}},
        {"convergence", {{"levels", 2}}},
        {"output_dir", out.string()},
        {"seed", 3}};
    CHECK(run_command("convergence", cfg, {}) == 0);
    const auto summary = load_json(out / "summary.json");
    CHECK(summary["verdicts"]["monotone_refinement"] == true);
    check_summary_schema(out / "summary.json");
}

TEST_CASE("characteristics command") {
    const auto out = fresh_dir("characteristics");
    json cfg = quadratic_solve_config(out);
    cfg["numerics"]["nt"] = 100;
    cfg["numerics"]["nx"] = 201;
    cfg["characteristics"] = {{"probes", 10}};
    const int rc = run_command("characteristics", cfg, {});
    CHECK(rc == 0);
    const auto summary = load_json(out / "summary.json");
    CHECK(summary["verdicts"]["consistency"] == true);
    CHECK(fs::exists(out / "path_000.csv"));
    check_summary_schema(out / "summary.json");
}

TEST_CASE("convergence command on the quadratic ladder") {
    const auto out = fresh_dir("convergence");
    json cfg = quadratic_solve_config(out);
    cfg["numerics"]["nt"] = 25;
    cfg["numerics"]["nx"] = 51;
    cfg["numerics"]["bounds"] = {{-2.0, 2.0}};
    cfg["initial"]["sd"] = 0.4;
    cfg["initial"]["mean"] = {0.0};
    cfg["convergence"] = {{"levels", 2}};
    const int rc = run_command("convergence", cfg, {});
    CHECK(rc == 0);
    CHECK(fs::exists(out / "ladder.csv"));
    const auto summary = load_json(out / "summary.json");
    CHECK(summary["verdicts"]["monotone_refinement"] == true);
    check_summary_schema(out / "summary.json");
}

TEST_CASE("reproducibility: identical config and seed, byte-identical summaries") {
    const auto out1 = fresh_dir("repro1");
    const auto out2 = fresh_dir("repro2");
    auto cfg = quadratic_solve_config(out1);
    REQUIRE(run_command("solve", cfg, {}) == 0);
    cfg["output_dir"] = out2.string();
    REQUIRE(run_command("solve", cfg, {}) == 0);
    auto a = load_json(out1 / "summary.json");
    auto b = load_json(out2 / "summary.json");
    a.erase("timestamp");
    b.erase("timestamp");
    CHECK(a.dump() == b.dump());
}

TEST_CASE("config validation names the offending key") {
    const auto out = fresh_dir("badcfg");
    json cfg = quadratic_solve_config(out);
    cfg["model"]["params"] = {{"beta", 0.5}};
    try {
        run_command("solve", cfg, {});
        FAIL("expected ConfigInvalid");
    } catch (const ConfigInvalid& e) {
        CHECK(std::string(e.what()).find("beta") != std::string::npos);
    }

    json cfg2 = quadratic_solve_config(out);
    cfg2["initial"] = {{"csv", "/nonexistent/file.csv"}};
    try {
        run_command("solve", cfg2, {});
        FAIL("expected ConfigInvalid");
    } catch (const ConfigInvalid& e) {
        CHECK(std::string(e.what()).find("initial.csv") != std::string::npos);
    }

    CHECK_THROWS_AS(run_command("frobnicate", quadratic_solve_config(out), {}), ConfigInvalid);
}

TEST_CASE("run_from_file: exit 1 on missing or broken config, 0 on success") {
    CHECK(run_from_file("solve", "/nonexistent/config.json", {}) == 1);

    const auto out = fresh_dir("fromfile");
    const auto cfg_path = out / "config.json";
    {
        std::ofstream f(cfg_path);
        f << quadratic_solve_config(out / "artifacts").dump(2);
    }
    CHECK(run_from_file("solve", cfg_path.string(), {}) == 0);
    CHECK(fs::exists(out / "artifacts" / "summary.json"));

    {
        std::ofstream f(cfg_path);
        f << "{ not json";
    }
    CHECK(run_from_file("solve", cfg_path.string(), {}) == 1);
}

TEST_CASE("overrides: seed, output dir, and threads") {
    const auto out = fresh_dir("override");
    auto cfg = quadratic_solve_config(fresh_dir("override_ignored"));
    CliOverrides ov;
    ov.output_dir = out.string();
    ov.seed = 99;
    ov.threads = 2;
    REQUIRE(run_command("solve", cfg, ov) == 0);
    const auto summary = load_json(out / "summary.json");
    CHECK(summary["seed"] == 99);
    CHECK(summary["threads"] == 2);
    mfgkit::set_threads(0);
}
