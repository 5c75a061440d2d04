#include "mfgkit/cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "mfgkit/hamsys.hpp"
#include "mfgkit/linalg.hpp"
#include "mfgkit/mfg.hpp"
#include "mfgkit/monotone.hpp"
#include "mfgkit/parallel.hpp"
#include "mfgkit/rng.hpp"
#include "mfgkit/svg.hpp"

namespace mfgkit {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

[[noreturn]] void bad_key(const std::string& key, const std::string& why) {
    throw ConfigInvalid("config key '" + key + "': " + why);
}

double num_at(const json& j, const std::string& key, double fallback) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_number()) bad_key(key, "must be a number");
    return j.at(key).get<double>();
}

std::size_t size_at(const json& j, const std::string& key, std::size_t fallback) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_number_unsigned() && !j.at(key).is_number_integer())
        bad_key(key, "must be a non-negative integer");
    const auto v = j.at(key).get<long long>();
    if (v < 0) bad_key(key, "must be >= 0");
    return static_cast<std::size_t>(v);
}

std::string str_at(const json& j, const std::string& key, const std::string& fallback) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_string()) bad_key(key, "must be a string");
    return j.at(key).get<std::string>();
}

MfgProblem model_from_config(const json& cfg) {
    if (!cfg.contains("model")) bad_key("model", "missing");
    const json& m = cfg.at("model");
    const std::string name = str_at(m, "name", "");
    if (name.empty()) bad_key("model.name", "missing");
    std::map<std::string, double> params;
    if (m.contains("params")) {
        if (!m.at("params").is_object()) bad_key("model.params", "must be an object");
        for (const auto& [key, value] : m.at("params").items()) {
            if (key == "beta") {
                if (!value.is_number() || value.get<double>() != 0.0)
                    bad_key("model.params.beta", "must be absent or 0 in this toolkit");
                continue;
            }
            if (!value.is_number()) bad_key("model.params." + key, "must be a number");
            params[key] = value.get<double>();
        }
    }
    return builtin(name, params);
}

ParticleMeasure measure_from_config(const json& init, std::size_t dim, std::uint64_t seed,
                                    const std::string& who) {
    if (init.contains("csv")) {
        const std::string path = str_at(init, "csv", "");
        if (!fs::exists(path)) bad_key(who + ".csv", "file does not exist: " + path);
        auto mu = load_measure_csv(path);
        if (mu.dim() != dim) bad_key(who + ".csv", "dimension does not match the model");
        return mu;
    }
    const std::string gen = str_at(init, "generator", "gaussian");
    const std::size_t n = size_at(init, "n", 1000);
    if (n == 0) bad_key(who + ".n", "must be >= 1");
    if (gen == "gaussian") {
        std::vector<double> mean(dim, 0.0);
        if (init.contains("mean")) {
            if (!init.at("mean").is_array() || init.at("mean").size() != dim)
                bad_key(who + ".mean", "must be an array of length dim");
            for (std::size_t k = 0; k < dim; ++k) mean[k] = init.at("mean")[k].get<double>();
        }
        const double sd = num_at(init, "sd", 1.0);
        if (sd <= 0.0) bad_key(who + ".sd", "must be > 0");
        auto mu = sample_gaussian(n, dim, mean, sd, derive_seed(seed, 1001));
        if (init.contains("center_exact") && init.at("center_exact").get<bool>())
            mu = center_to_mean(mu, mean);
        return mu;
    }
    if (gen == "uniform") {
        return sample_uniform(n, dim, num_at(init, "lo", -1.0), num_at(init, "hi", 1.0),
                              derive_seed(seed, 1002));
    }
    bad_key(who + ".generator", "must be gaussian, uniform, or csv");
}

SolveParams solve_params_from_config(const json& cfg, std::uint64_t seed) {
    SolveParams p;
    p.seed = seed;
    if (!cfg.contains("numerics")) return p;
    const json& n = cfg.at("numerics");
    p.damping = num_at(n, "damping", p.damping);
    p.tol = num_at(n, "tol", p.tol);
    p.max_iter = size_at(n, "max_iter", p.max_iter);
    p.nt = size_at(n, "nt", p.nt);
    p.nx = size_at(n, "nx", p.nx);
    p.n_particles = size_at(n, "n_particles", p.n_particles);
    if (n.contains("bounds")) {
        if (!n.at("bounds").is_array()) bad_key("numerics.bounds", "must be [[lo,hi],...]");
        for (const auto& pair : n.at("bounds")) {
            if (!pair.is_array() || pair.size() != 2)
                bad_key("numerics.bounds", "each entry must be [lo, hi]");
            p.lo.push_back(pair[0].get<double>());
            p.hi.push_back(pair[1].get<double>());
        }
    }
    return p;
}

SamplerConfig sampler_from_config(const json& mono, std::size_t dim) {
    SamplerConfig cfg;
    cfg.dim = dim;
    cfg.n = size_at(mono, "n", 128);
    cfg.scale = num_at(mono, "scale", 1.0);
    const std::string gen = str_at(mono, "generator", "gaussian_mixture");
    if (gen == "gaussian_mixture")
        cfg.generator = GeneratorKind::gaussian_mixture;
    else if (gen == "uniform")
        cfg.generator = GeneratorKind::uniform;
    else if (gen == "csv")
        cfg.generator = GeneratorKind::csv;
    else
        bad_key("monotone.generator", "must be gaussian_mixture, uniform, or csv");
    if (cfg.generator == GeneratorKind::csv) {
        cfg.csv_mu1 = str_at(mono, "csv_mu1", "");
        cfg.csv_mu2 = str_at(mono, "csv_mu2", "");
        if (!fs::exists(cfg.csv_mu1)) bad_key("monotone.csv_mu1", "file does not exist");
        if (!fs::exists(cfg.csv_mu2)) bad_key("monotone.csv_mu2", "file does not exist");
    }
    const std::string coup = str_at(mono, "coupling", "stratified");
    if (coup == "optimal")
        cfg.coupling = CouplingKind::optimal;
    else if (coup == "index")
        cfg.coupling = CouplingKind::index;
    else if (coup == "random")
        cfg.coupling = CouplingKind::random;
    else if (coup == "stratified")
        cfg.coupling = CouplingKind::stratified;
    else
        bad_key("monotone.coupling", "must be optimal, index, random, or stratified");
    return cfg;
}

void write_curve_csv(const std::string& path, const std::string& xname, const std::string& yname,
                     const std::vector<double>& xs, const std::vector<double>& ys) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open for writing: " + path);
    f.precision(17);
    f << xname << "," << yname << "\n";
    for (std::size_t i = 0; i < xs.size(); ++i) f << xs[i] << "," << ys[i] << "\n";
}

std::string timestamp_utc() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

struct SummaryWriter {
    json doc;
    std::string dir;

    SummaryWriter(const std::string& command, const json& cfg, const std::string& out_dir,
                  std::uint64_t seed) {
        dir = out_dir;
        fs::create_directories(dir);
        doc["schema_version"] = kSummarySchemaVersion;
        doc["command"] = command;
        doc["toolkit_version"] = kToolkitVersion;
        doc["seed"] = seed;
        doc["threads"] = effective_threads();
        doc["model"] = {{"name", cfg.at("model").at("name")}};
        if (cfg.at("model").contains("params")) doc["model"]["params"] = cfg.at("model").at("params");
        if (cfg.contains("numerics")) doc["numerics"] = cfg.at("numerics");
        doc["results"] = json::object();
        doc["verdicts"] = json::object();
    }

    void finish() {
        doc["timestamp"] = timestamp_utc();
        std::ofstream f(dir + "/summary.json");
        f << doc.dump(2) << "\n";
    }
};

double closed_form_terminal_mean(double m0, double a, double T) {
    return m0 / (1.0 + (1.0 - a) * T);
}

json report_json(const MonotonicityReport& rep, const std::string& witness_file) {
    return json{{"kind", rep.kind},          {"trials", rep.trials},
                {"min_pairing", rep.min_pairing}, {"tol", rep.tol},
                {"verdict", to_string(rep.verdict)}, {"witness_file", witness_file},
                {"note", rep.note}};
}

int cmd_solve(const json& cfg, const std::string& out, std::uint64_t seed, bool plots) {
    const MfgProblem problem = model_from_config(cfg);
    SolveParams params = solve_params_from_config(cfg, seed);
    const json init = cfg.contains("initial") ? cfg.at("initial") : json::object();
    ParticleMeasure rho0 = measure_from_config(
        init.is_object() && !init.empty() ? init
                                          : json{{"generator", "gaussian"}, {"n", params.n_particles}},
        problem.dim, seed, "initial");

    SummaryWriter summary("solve", cfg, out, seed);
    MfgSolution sol = solve(problem, rho0, params);

    std::vector<double> iters(sol.residual_history.size());
    for (std::size_t i = 0; i < iters.size(); ++i) iters[i] = static_cast<double>(i + 1);
    write_curve_csv(out + "/residual_history.csv", "iteration", "sup_t_w1", iters,
                    sol.residual_history);
    sol.flow.save(out + "/flow");
    save_value_field(sol.value, out + "/value");
    if (plots)
        write_line_chart(out + "/residuals.svg", "Picard residuals", "iteration", "sup_t W1",
                         {{"residual", iters, sol.residual_history}});

    json& r = summary.doc["results"];
    r["iterations"] = sol.iterations;
    r["converged"] = sol.converged;
    r["final_residual"] = sol.residual_history.back();
    r["terminal_mean"] = std::vector<double>(sol.flow.terminal().mean().begin(),
                                             sol.flow.terminal().mean().end());
    r["initial_mean"] = std::vector<double>(rho0.mean().begin(), rho0.mean().end());
    r["max_moment2"] = sol.flow.max_moment2();
    r["w1_time_lipschitz"] = sol.flow.lipschitz_w1();
    summary.doc["verdicts"]["converged"] = sol.converged;
    summary.finish();
    return sol.converged ? 0 : 2;
}

int cmd_check_monotone(const json& cfg, const std::string& out, std::uint64_t seed, bool plots) {
    (void)plots;
    const MfgProblem problem = model_from_config(cfg);
    const json mono = cfg.contains("monotone") ? cfg.at("monotone") : json::object();
    SamplerConfig sampler = sampler_from_config(mono, problem.dim);
    const std::size_t trials = size_at(mono, "trials", 100);
    std::vector<std::string> checks = {"displacement_g", "lasry_lions", "displacement_L",
                                       "displacement_H"};
    if (mono.contains("checks")) {
        checks.clear();
        for (const auto& c : mono.at("checks")) checks.push_back(c.get<std::string>());
    }

    SummaryWriter summary("check-monotone", cfg, out, seed);
    json& r = summary.doc["results"];
    for (const std::string& kind : checks) {
        MonotonicityReport rep;
        if (kind == "displacement_g")
            rep = check_displacement_g(problem.terminal, sampler, trials, seed);
        else if (kind == "lasry_lions")
            rep = check_lasry_lions(problem.terminal, sampler, trials, seed);
        else if (kind == "displacement_L")
            rep = check_displacement_L(problem.lagrangian, sampler, trials, seed);
        else if (kind == "displacement_H")
            rep = check_displacement_H(problem.hamiltonian, sampler, trials, seed);
        else if (kind == "second_order")
            rep = check_second_order(problem.hamiltonian, sampler, trials, seed);
        else
            bad_key("monotone.checks", "unknown check: " + kind);
        const std::string witness_file = "witness_" + kind + ".csv";
        save_witness_csv(rep.witness, out + "/" + witness_file);
        r[kind] = report_json(rep, witness_file);
        summary.doc["verdicts"][kind] = to_string(rep.verdict);
    }
    summary.finish();
    return 0;  // audit completed; verdicts live in the summary
}

int cmd_stability(const json& cfg, const std::string& out, std::uint64_t seed, bool plots) {
    const MfgProblem problem = model_from_config(cfg);
    SolveParams params = solve_params_from_config(cfg, seed);
    if (!cfg.contains("initial")) bad_key("initial", "missing");
    ParticleMeasure rho0_1 = measure_from_config(cfg.at("initial"), problem.dim, seed, "initial");
    ParticleMeasure rho0_2 = [&] {
        if (cfg.contains("initial2")) {
            const json& second = cfg.at("initial2");
            if (second.contains("translate")) {
                if (!second.at("translate").is_array() ||
                    second.at("translate").size() != problem.dim)
                    bad_key("initial2.translate", "must be an array of length dim");
                std::vector<double> shift(problem.dim);
                for (std::size_t k = 0; k < problem.dim; ++k)
                    shift[k] = second.at("translate")[k].get<double>();
                return rho0_1.translated(shift);
            }
            return measure_from_config(second, problem.dim, derive_seed(seed, 2), "initial2");
        }
        bad_key("initial2", "missing (second initial measure or translate)");
    }();

    SummaryWriter summary("stability", cfg, out, seed);
    StabilityReport rep = stability_experiment(problem, rho0_1, rho0_2, params);

    write_curve_csv(out + "/w2_curve.csv", "t", "w2", rep.times, rep.w2_curve);
    write_curve_csv(out + "/pairing_curve.csv", "t", "pairing", rep.times, rep.pairing_curve);
    for (int which : {1, 2}) {
        const auto& hist = which == 1 ? rep.sol1.residual_history : rep.sol2.residual_history;
        std::vector<double> iters(hist.size());
        for (std::size_t i = 0; i < hist.size(); ++i) iters[i] = static_cast<double>(i + 1);
        write_curve_csv(out + "/residuals_" + std::to_string(which) + ".csv", "iteration",
                        "sup_t_w1", iters, hist);
    }
    if (plots) {
        write_line_chart(out + "/w2_curve.svg", "W2 between populations", "t", "W2",
                         {{"w2", rep.times, rep.w2_curve}});
        write_line_chart(out + "/pairing_curve.svg", "Displacement pairing along flows", "t",
                         "pairing", {{"pairing", rep.times, rep.pairing_curve}});
    }

    const auto& grid = rep.sol1.value.grid;
    const double eps = 1e-6 + 5.0 * (grid.max_dx() + grid.dt() +
                                     1.0 / std::sqrt(static_cast<double>(rho0_1.size())));
    double pairing_min = rep.pairing_curve.front();
    bool nonincreasing = true;
    for (std::size_t k = 0; k < rep.pairing_curve.size(); ++k) {
        pairing_min = std::min(pairing_min, rep.pairing_curve[k]);
        if (k > 0 && rep.pairing_curve[k] > rep.pairing_curve[k - 1] + eps) nonincreasing = false;
    }
    const bool pairing_ok = pairing_min >= -eps;

    json& r = summary.doc["results"];
    r["initial_gap"] = rep.initial_gap;
    r["zero_gap"] = rep.zero_gap;
    r["ratio"] = rep.ratio;
    r["sharp_flag"] = rep.sharp_flag;
    r["grad_gap"] = rep.grad_gap;
    r["pairing_min"] = pairing_min;
    r["pairing_eps"] = eps;
    r["iterations"] = {rep.sol1.iterations, rep.sol2.iterations};
    summary.doc["verdicts"]["pairing_nonnegative"] = pairing_ok;
    summary.doc["verdicts"]["pairing_nonincreasing"] = nonincreasing;
    summary.finish();
    return pairing_ok ? 0 : 2;
}

int cmd_characteristics(const json& cfg, const std::string& out, std::uint64_t seed, bool plots) {
    (void)plots;
    const MfgProblem problem = model_from_config(cfg);
    SolveParams params = solve_params_from_config(cfg, seed);
    if (!cfg.contains("initial")) bad_key("initial", "missing");
    ParticleMeasure rho0 = measure_from_config(cfg.at("initial"), problem.dim, seed, "initial");
    const std::size_t probes =
        cfg.contains("characteristics") ? size_at(cfg.at("characteristics"), "probes", 20) : 20;

    SummaryWriter summary("characteristics", cfg, out, seed);
    MfgSolution sol = solve(problem, rho0, params);
    if (!sol.converged) {
        summary.doc["verdicts"]["converged"] = false;
        summary.finish();
        return 2;
    }
    ConsistencyReport rep = consistency_check(problem, sol, probes, seed);

    // A few sample paths for inspection.
    const std::size_t n_export = std::min<std::size_t>(4, rho0.size());
    for (std::size_t i = 0; i < n_export; ++i) {
        const auto path = shoot(problem, sol.flow, rho0.point(i), 1e-9);
        char name[32];
        std::snprintf(name, sizeof name, "/path_%03zu.csv", i);
        save_path_csv(path, problem.dim, out + name);
    }

    json& r = summary.doc["results"];
    r["probes"] = rep.probes;
    r["max_defect"] = rep.max_defect;
    r["tolerance"] = rep.tolerance;
    r["worst_x0"] = rep.worst_x0;
    summary.doc["verdicts"]["consistency"] = rep.pass;
    summary.doc["verdicts"]["converged"] = true;
    summary.finish();
    return rep.pass ? 0 : 2;
}

int cmd_convergence(const json& cfg, const std::string& out, std::uint64_t seed, bool plots) {
    (void)plots;
    const MfgProblem problem = model_from_config(cfg);
    if (problem.name != "quadratic" && problem.name != "lq_mean")
        bad_key("model.name", "convergence requires a closed-form model (quadratic or lq_mean)");
    SolveParams base = solve_params_from_config(cfg, seed);
    const std::size_t levels =
        cfg.contains("convergence") ? size_at(cfg.at("convergence"), "levels", 3) : 3;
    const json init = cfg.contains("initial") ? cfg.at("initial") : json::object();
    ParticleMeasure rho0 = measure_from_config(
        init.is_object() && !init.empty() ? init
                                          : json{{"generator", "gaussian"}, {"n", base.n_particles}},
        problem.dim, seed, "initial");
    const double a = problem.name == "lq_mean"
                         ? (cfg.at("model").contains("params")
                                ? num_at(cfg.at("model").at("params"), "a", 0.5)
                                : 0.5)
                         : 0.0;

    SummaryWriter summary("convergence", cfg, out, seed);
    std::vector<double> errors, level_ids;
    for (std::size_t level = 0; level < levels; ++level) {
        SolveParams p = base;
        const std::size_t factor = 1u << level;  // halve dx and dt per level
        p.nx = (base.nx - 1) * factor + 1;
        p.nt = base.nt * factor;
        MfgSolution sol = solve(problem, rho0, p);
        double err;
        if (problem.name == "quadratic") {
            // closed form u(t,x) = |x|^2 / (2 (1 + T - t))
            const auto& grid = sol.value.grid;
            const std::size_t N = grid.num_nodes();
            std::vector<double> x(grid.dim);
            err = 0.0;
            for (std::size_t k = 0; k <= grid.nt; ++k) {
                const double t = grid.time(k);
                for (std::size_t j = 0; j < N; ++j) {
                    grid.node_coords(j, x);
                    const double exact = dot(x, x) / (2.0 * (1.0 + grid.horizon - t));
                    err = std::max(err, std::fabs(sol.value.u[k * N + j] - exact));
                }
            }
        } else {
            const double target = closed_form_terminal_mean(rho0.mean()[0], a, problem.horizon);
            err = std::fabs(sol.flow.terminal().mean()[0] - target);
        }
        errors.push_back(err);
        level_ids.push_back(static_cast<double>(level));
    }
    bool monotone_refinement = true;
    for (std::size_t i = 0; i + 1 < errors.size(); ++i)
        if (errors[i + 1] > 1.05 * errors[i]) monotone_refinement = false;
    write_curve_csv(out + "/ladder.csv", "level", "error", level_ids, errors);

    summary.doc["results"]["errors"] = errors;
    summary.doc["verdicts"]["monotone_refinement"] = monotone_refinement;
    summary.finish();
    return monotone_refinement ? 0 : 2;
}

}  // namespace

int run_command(const std::string& command, const nlohmann::json& config,
                const CliOverrides& overrides) {
    if (!config.is_object()) throw ConfigInvalid("config root must be a JSON object");
    if (config.contains("beta") && config.at("beta").get<double>() != 0.0)
        bad_key("beta", "must be absent or 0");

    std::uint64_t seed = overrides.seed ? *overrides.seed
                                        : static_cast<std::uint64_t>(size_at(config, "seed", 0));
    std::string out = !overrides.output_dir.empty() ? overrides.output_dir
                                                    : str_at(config, "output_dir", "out");
    int threads = overrides.threads ? *overrides.threads
                                    : static_cast<int>(size_at(config, "threads", 0));
    if (threads == 0) {
        if (const char* env = std::getenv("MFGKIT_THREADS")) threads = std::atoi(env);
    }
    set_threads(threads);
    const bool plots = config.contains("plots") && config.at("plots").get<bool>();

    if (command == "solve") return cmd_solve(config, out, seed, plots);
    if (command == "check-monotone") return cmd_check_monotone(config, out, seed, plots);
    if (command == "stability") return cmd_stability(config, out, seed, plots);
    if (command == "characteristics") return cmd_characteristics(config, out, seed, plots);
    if (command == "convergence") return cmd_convergence(config, out, seed, plots);
    throw ConfigInvalid("unknown command: " + command);
}

int run_from_file(const std::string& command, const std::string& config_path,
                  const CliOverrides& overrides) {
    try {
        std::ifstream f(config_path);
        if (!f) throw ConfigInvalid("cannot open config file: " + config_path);
        json config = json::parse(f);
        return run_command(command, config, overrides);
    } catch (const json::exception& e) {
        std::cerr << "error: config parse failure: " << e.what() << "\n";
        return 1;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace mfgkit
