#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rbdsde/config.hpp"
#include "rbdsde/errors.hpp"
#include "rbdsde/reflection.hpp"
#include "rbdsde/report_io.hpp"
#include "rbdsde/rng.hpp"
#include "rbdsde/simulate.hpp"
#include "rbdsde/solver.hpp"
#include "rbdsde/verify.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace rbdsde;

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_override;
    std::optional<std::uint64_t> seed_override;
    int jobs = 1;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "Experiment configuration (JSON)")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--out", args.out_override, "Output directory (overrides the config)");
    cmd->add_option("--seed", args.seed_override, "Master seed (overrides the config)");
    cmd->add_option("--jobs", args.jobs, "Worker threads for the backward solves")
        ->check(CLI::PositiveNumber);
}

ExperimentConfig load(const CommonArgs& args) {
    ExperimentConfig cfg = load_config(args.config_path);
    if (args.seed_override) cfg.seed = *args.seed_override;
    if (!args.out_override.empty()) cfg.output_dir = args.out_override;
    return cfg;
}

/// Everything a run needs, constructed in dependency order from a config.
/// The barrier keeps a pointer into the tree, so the pack is pinned in place:
/// members are built directly at their final addresses and the whole thing
/// neither copies nor moves.
struct Instance {
    LevyMeasure measure;
    TeugelsBasis basis;
    ScenarioTree tree;
    Barrier barrier;
    DriverPair drivers;

    explicit Instance(const ExperimentConfig& cfg)
        : measure(cfg.atoms),
          basis(teugels_basis(measure)),
          tree(build_tree(measure, basis, cfg.T, cfg.N, cfg.scenarios, cfg.seed)),
          barrier(make_barrier(cfg.barrier, tree)),
          drivers(cfg.f, cfg.g) {}

    Instance(const Instance&) = delete;
    Instance& operator=(const Instance&) = delete;
};

void emit(const ExperimentConfig& cfg, const std::string& name, const std::string& content) {
    fs::create_directories(cfg.output_dir);
    write_text_file((fs::path(cfg.output_dir) / name).string(), content);
    std::cerr << "wrote " << (fs::path(cfg.output_dir) / name).string() << "\n";
}

json norms_to_json(const BetaNorms& norms) {
    return json{{"beta", norms.beta},
                {"sup_term", norms.sup_term},
                {"y_integral", norms.y_integral},
                {"z_integral", norms.z_integral},
                {"k_terminal_sq", norms.k_terminal_sq},
                {"data_norm", norms.data_norm},
                {"solution_norm", norms.solution_norm()}};
}

double scenario_mean_y0(const ScenarioTree& tree, const SolutionTriple& sol, bool plus) {
    double acc = 0.0;
    for (int p = 0; p < sol.scenarios(); ++p)
        acc += plus ? sol.y_plus(p, tree, 0, 0) : sol.y_value(p, tree, 0, 0);
    return acc / sol.scenarios();
}

double scenario_mean_k_terminal(const ScenarioTree& tree, const SolutionTriple& sol) {
    double acc = 0.0;
    for (int p = 0; p < sol.scenarios(); ++p) acc += sol.expected_k_terminal(p, tree);
    return acc / sol.scenarios();
}

bool oracle_applicable(const DriverPair& drivers) {
    return !drivers.f().depends_on_z() && !drivers.g_depends_on_solution();
}

int run_basis(const CommonArgs& args) {
    ExperimentConfig cfg = load(args);
    LevyMeasure measure(cfg.atoms);
    TeugelsBasis basis = teugels_basis(measure);

    json out;
    out["dimension"] = basis.dimension();
    json alpha = json::array();
    for (int i = 0; i < basis.dimension(); ++i) {
        json row = json::array();
        for (int j = 0; j <= i; ++j) row.push_back(basis.alpha(i, j));
        alpha.push_back(row);
    }
    out["alpha"] = alpha;
    json moments = json::array();
    for (int i = 0; i <= 2 * basis.dimension() + 1; ++i) moments.push_back(basis.moment(i));
    out["moments"] = moments;

    std::string rendered = out.dump(2) + "\n";
    if (cfg.write_json) emit(cfg, "basis.json", rendered);
    if (cfg.write_csv) {
        std::string csv = "i,j,alpha\n";
        for (int i = 0; i < basis.dimension(); ++i)
            for (int j = 0; j <= i; ++j)
                csv += std::to_string(i) + "," + std::to_string(j) + "," +
                       format_double(basis.alpha(i, j)) + "\n";
        emit(cfg, "basis.csv", csv);
    }
    std::cout << rendered;
    return 0;
}

int run_solve(const CommonArgs& args, std::optional<int> n_override) {
    ExperimentConfig cfg = load(args);
    Instance inst(cfg);
    int n = n_override.value_or(cfg.penalty_schedule.back());
    if (n < 0) throw ConfigError("n: must be >= 0");

    json summary;
    SolutionTriple sol;
    if (inst.drivers.g_depends_on_solution()) {
        PicardResult picard =
            picard_outer_loop(inst.tree, inst.drivers, inst.barrier, n, 50, 1e-10, cfg.beta, args.jobs);
        sol = std::move(picard.solution);
        summary["picard"] = json{{"iterations", picard.iterations},
                                 {"converged", picard.converged},
                                 {"final_diff", picard.diffs.empty() ? 0.0 : picard.diffs.back()}};
    } else {
        SolveOptions opts;
        opts.jobs = args.jobs;
        sol = solve_penalized(inst.tree, inst.drivers, inst.barrier, n, opts);
        KExtraction extraction = extract_K(inst.tree, sol, inst.drivers, inst.barrier);
        summary["k_extraction"] = json{{"max_mismatch", extraction.max_mismatch},
                                       {"min_increment", extraction.min_increment}};
    }

    BetaNorms norms = beta_norms(inst.tree, sol, inst.barrier, inst.drivers, cfg.beta);
    summary["n"] = n;
    summary["scenarios"] = cfg.scenarios;
    summary["steps"] = cfg.N;
    summary["horizon"] = cfg.T;
    summary["y0_mean"] = scenario_mean_y0(inst.tree, sol, false);
    summary["y0_plus_mean"] = scenario_mean_y0(inst.tree, sol, true);
    summary["k_terminal_mean"] = scenario_mean_k_terminal(inst.tree, sol);
    summary["max_projection_residual"] = sol.max_projection_residual;
    summary["stiffness_warning"] = sol.stiffness_warning;
    summary["jumps_active"] = n >= 1 ? static_cast<int>(inst.barrier.right_jump_times(n).indices.size()) : 0;
    summary["norms"] = norms_to_json(norms);

    std::string rendered = summary.dump(2) + "\n";
    if (cfg.write_json) emit(cfg, "solution_summary.json", rendered);
    if (cfg.write_csv) emit(cfg, "solution_times.csv", solution_times_csv(inst.tree, sol));
    std::cout << rendered;
    return 0;
}

int run_converge(const CommonArgs& args) {
    ExperimentConfig cfg = load(args);
    Instance inst(cfg);

    std::optional<SolutionTriple> oracle;
    if (oracle_applicable(inst.drivers))
        oracle = snell_oracle(inst.tree, inst.drivers, inst.barrier);

    SweepOptions opts;
    opts.oracle = oracle ? &*oracle : nullptr;
    opts.beta = cfg.beta;
    opts.jobs = args.jobs;
    ConvergenceReport report =
        penalization_sweep(inst.tree, inst.drivers, inst.barrier, cfg.penalty_schedule, opts);

    if (cfg.write_csv) emit(cfg, "report.csv", convergence_csv(report));
    if (cfg.write_json) emit(cfg, "report.json", convergence_json(report));
    if (cfg.write_json) emit(cfg, "config_used.json", dump_config(cfg));

    const ConvergenceRow& last = report.rows.back();
    json out{{"n", last.n},
             {"violation", last.violation},
             {"skorokhod", last.skorokhod},
             {"solution_norm", last.solution_norm},
             {"data_norm", last.data_norm}};
    if (last.has_oracle) out["oracle_err"] = last.oracle_err;
    std::cout << out.dump(2) + "\n";
    return 0;
}

int run_oracle(const CommonArgs& args) {
    ExperimentConfig cfg = load(args);
    Instance inst(cfg);
    SolutionTriple sol = snell_oracle(inst.tree, inst.drivers, inst.barrier);
    SkorokhodReport skorokhod = skorokhod_residual(inst.tree, sol, inst.barrier);

    json summary{{"y0_mean", scenario_mean_y0(inst.tree, sol, false)},
                 {"y0_plus_mean", scenario_mean_y0(inst.tree, sol, true)},
                 {"k_terminal_mean", scenario_mean_k_terminal(inst.tree, sol)},
                 {"minimality_residual", skorokhod.residual},
                 {"max_barrier_gap", skorokhod.max_barrier_gap},
                 {"max_projection_residual", sol.max_projection_residual}};
    std::string rendered = summary.dump(2) + "\n";
    if (cfg.write_json) emit(cfg, "oracle_summary.json", rendered);
    if (cfg.write_csv) emit(cfg, "oracle_times.csv", solution_times_csv(inst.tree, sol));
    std::cout << rendered;
    return 0;
}

int run_verify(const CommonArgs& args) {
    ExperimentConfig cfg = load(args);
    Instance inst(cfg);
    int n = cfg.penalty_schedule.back();
    json checks = json::array();
    bool all_pass = true;
    auto record = [&](const std::string& name, bool pass, json detail) {
        detail["name"] = name;
        detail["pass"] = pass;
        checks.push_back(detail);
        all_pass = all_pass && pass;
    };

    {
        RandomStream stream(cfg.seed, 0xCAFEu);
        std::vector<double> terminal(inst.tree.num_states(cfg.N));
        for (double& v : terminal) v = 2.0 * stream.next_uniform() - 1.0;
        RepresentationResult rep = representation_residual(inst.tree, terminal);
        record("representation", rep.max_residual <= 1e-12,
               json{{"max_residual", rep.max_residual}, {"tolerance", 1e-12}});
    }

    bool coupled = inst.drivers.g_depends_on_solution();
    SolutionTriple sol;
    if (coupled) {
        sol = picard_outer_loop(inst.tree, inst.drivers, inst.barrier, n, 50, 1e-10, cfg.beta,
                                args.jobs)
                  .solution;
    } else {
        SolveOptions opts;
        opts.jobs = args.jobs;
        sol = solve_penalized(inst.tree, inst.drivers, inst.barrier, n, opts);
    }
    {
        double energy = energy_identity_residual(inst.tree, sol);
        record("energy_identity", energy <= 1e-10, json{{"residual", energy}, {"tolerance", 1e-10}});
    }
    if (!coupled) {
        KExtraction extraction = extract_K(inst.tree, sol, inst.drivers, inst.barrier);
        record("reflection_consistency", true,
               json{{"max_mismatch", extraction.max_mismatch},
                    {"min_increment", extraction.min_increment}});
    }

    {
        const long num_paths = 10000;
        RandomStream stream(cfg.seed, 0xB7ACE7u);
        std::vector<std::vector<LevyPathEvent>> paths;
        paths.reserve(num_paths);
        for (long i = 0; i < num_paths; ++i)
            paths.push_back(simulate_levy_path(inst.measure, cfg.T, stream));
        int dim = std::min(inst.basis.dimension(), 3);
        bool pass = true;
        double worst = 0.0;
        for (int i = 0; i < dim; ++i)
            for (int j = i; j < dim; ++j) {
                BracketEstimate est = empirical_bracket(paths, inst.basis, i, j, cfg.T);
                double target = (i == j) ? cfg.T : 0.0;
                double pull = std::abs(est.estimate - target);
                if (pull > 3.0 * est.std_err) pass = false;
                if (est.std_err > 0) worst = std::max(worst, pull / est.std_err);
            }
        record("bracket_orthonormality", pass,
               json{{"paths", num_paths}, {"worst_pull_std_errs", worst}, {"limit_std_errs", 3.0}});
    }

    if (cfg.f.family == DriverFamily::Affine && !coupled) {
        DriverSpec f2 = cfg.f;
        f2.a += 0.1;
        DriverPair shifted(f2, cfg.g);
        SolveOptions opts;
        opts.jobs = args.jobs;
        SolutionTriple sol2 = solve_penalized(inst.tree, shifted, inst.barrier, n, opts);
        ComparisonInstance comparison =
            make_comparison_instance(inst.tree, inst.drivers.f(), shifted.f(), sol, sol2);
        ComparisonReport report = comparison_check(comparison);
        record("comparison_order", report.ordered && report.positivity_ok,
               json{{"worst_gap", report.worst_gap},
                    {"min_positivity", report.min_positivity},
                    {"max_u", report.max_u}});
    }

    json out{{"checks", checks}, {"all_pass", all_pass}};
    std::string rendered = out.dump(2) + "\n";
    if (cfg.write_json) emit(cfg, "verify_report.json", rendered);
    std::cout << rendered;
    return all_pass ? 0 : 1;
}

int run_simulate(const CommonArgs& args) {
    ExperimentConfig cfg = load(args);
    LevyMeasure measure(cfg.atoms);

    std::string csv = "path,time,size\n";
    long total_events = 0;
    for (int p = 0; p < cfg.scenarios; ++p) {
        RandomStream stream(cfg.seed, static_cast<std::uint64_t>(p));
        std::vector<LevyPathEvent> events = simulate_levy_path(measure, cfg.T, stream);
        total_events += static_cast<long>(events.size());
        for (const LevyPathEvent& e : events)
            csv += std::to_string(p) + "," + format_double(e.time) + "," + format_double(e.size) +
                   "\n";
    }
    json summary{{"paths", cfg.scenarios},
                 {"total_events", total_events},
                 {"mean_events_per_path", static_cast<double>(total_events) / cfg.scenarios},
                 {"expected_events_per_path", measure.total_intensity() * cfg.T}};
    std::string rendered = summary.dump(2) + "\n";
    if (cfg.write_csv) emit(cfg, "events.csv", csv);
    if (cfg.write_json) emit(cfg, "summary.json", rendered);
    std::cout << rendered;
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Penalized reflected backward equations on a recombining jump lattice"};
    app.require_subcommand(1);

    CommonArgs basis_args, solve_args, converge_args, oracle_args, verify_args, simulate_args;
    std::optional<int> n_override;

    CLI::App* basis_cmd = app.add_subcommand("basis", "Orthonormalized martingale basis of the jump measure");
    add_common(basis_cmd, basis_args);
    CLI::App* solve_cmd = app.add_subcommand("solve", "One penalized backward solve");
    add_common(solve_cmd, solve_args);
    solve_cmd->add_option("--n", n_override, "Penalty level (default: last schedule entry)");
    CLI::App* converge_cmd = app.add_subcommand("converge", "Penalization sweep with convergence diagnostics");
    add_common(converge_cmd, converge_args);
    CLI::App* oracle_cmd = app.add_subcommand("oracle", "Reference solution by dynamic programming");
    add_common(oracle_cmd, oracle_args);
    CLI::App* verify_cmd = app.add_subcommand("verify", "Structural self-checks on the configured instance");
    add_common(verify_cmd, verify_args);
    CLI::App* simulate_cmd = app.add_subcommand("simulate", "Continuous-time jump path simulation");
    add_common(simulate_cmd, simulate_args);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        app.exit(e);
        return 0;
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (basis_cmd->parsed()) return run_basis(basis_args);
        if (solve_cmd->parsed()) return run_solve(solve_args, n_override);
        if (converge_cmd->parsed()) return run_converge(converge_args);
        if (oracle_cmd->parsed()) return run_oracle(oracle_args);
        if (verify_cmd->parsed()) return run_verify(verify_args);
        if (simulate_cmd->parsed()) return run_simulate(simulate_args);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const InvalidInputError& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return 3;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
