// Command-line harness: builds bases, generates datasets, fits and scores
// surrogates, runs hyperparameter ensembles, and turns record files into
// plot-ready reports. Diagnostics go to stderr; machine output goes to files.

#include "surrbench/bench.hpp"
#include "surrbench/io.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace surrbench;

namespace {

struct GlobalArgs {
    std::string config_path;
    std::string out_dir = "out";
    std::uint64_t seed = 1;
    int threads = 1;
    bool full = false;
};

Config load_config(const GlobalArgs& args) {
    if (args.config_path.empty()) throw std::invalid_argument("--config is required");
    if (!fs::exists(args.config_path))
        throw std::invalid_argument("config file not found: " + args.config_path);
    Config config = Config::parse_file(args.config_path);
    if (args.full) {
        // paper-scale defaults; explicit config keys still win
        std::cerr << "[surrbench] --full: paper-scale defaults (grid 64, d_true 1000, K 250, "
                     "2000 epochs); expect long runtimes\n";
        if (!config.has("problem.grid_n")) config.set("problem.grid_n", "64");
        if (!config.has("problem.d_true")) config.set("problem.d_true", "1000");
        if (!config.has("test_set.k")) config.set("test_set.k", "250");
        if (!config.has("nn.epochs")) config.set("nn.epochs", "2000");
    }
    return config;
}

ProblemSetup problem_from_config(const Config& config) {
    return make_problem(static_cast<int>(config.get_int("problem.grid_n", 32)),
                        config.get_double("problem.s", 3.0),
                        static_cast<int>(config.get_int("problem.d_true", 256)),
                        config.get_double("problem.gamma", 0.1),
                        config.get_double("problem.delta", 0.5));
}

EvalSettings eval_from_config(const Config& config) {
    EvalSettings eval;
    eval.batch_sizes.clear();
    for (double b : config.get_double_list("eval.batch_sizes", {1, 128}))
        eval.batch_sizes.push_back(static_cast<int>(b));
    eval.repeats = static_cast<int>(config.get_int("eval.repeats", 3));
    return eval;
}

TestSet test_set_from_config(const Config& config, const ProblemSetup& problem,
                             const fs::path& out_dir) {
    return shared_test_set(problem, static_cast<int>(config.get_int("test_set.k", 128)),
                           static_cast<int>(config.get_int("test_set.h1_directions", 0)),
                           static_cast<std::uint64_t>(config.get_int("test_set.seed", 9001)),
                           out_dir / "test_sets");
}

// every run leaves a manifest with the resolved config and input hash so the
// invocation can be reproduced bit-identically
void write_run_manifest(const GlobalArgs& args, const Config& config, const std::string& command,
                        const fs::path& out_dir) {
    json manifest;
    manifest["command"] = command;
    manifest["config_path"] = args.config_path;
    manifest["config_hash"] = io::hex64(io::hash_file(args.config_path));
    manifest["resolved_config"] = config.resolved_text();
    manifest["seed"] = args.seed;
    manifest["threads"] = args.threads;
    manifest["full"] = args.full;
    io::write_text(out_dir / "manifest.json", manifest.dump(2) + "\n");
}

int cmd_basis(const GlobalArgs& args) {
    Config config = load_config(args);
    const fs::path out_dir = args.out_dir;
    fs::create_directories(out_dir);

    ProblemSetup problem = problem_from_config(config);
    const int n_basis = static_cast<int>(config.get_int("basis.n", 128));
    const int d_in = static_cast<int>(config.get_int("basis.d_in", 25));
    const int d_out = static_cast<int>(config.get_int("basis.d_out", 25));

    // persist the Matern eigenbasis
    io::write_matrix_colmajor(out_dir / "matern_basis.bin", *problem.eigenbasis);
    json matern;
    matern["kind"] = "matern_basis";
    matern["dof"] = problem.grid.dof_count();
    matern["count"] = problem.eigenbasis->cols();
    matern["gamma"] = problem.gamma;
    matern["delta"] = problem.delta;
    matern["layout"] = "column-major float64 LE";
    io::write_text(out_dir / "matern_manifest.json", matern.dump(2) + "\n");

    // PCA input/output bases from a fresh sample set
    DrawnSamples drawn =
        draw_and_solve(n_basis, problem.spec, problem.ops, *problem.eigenbasis, args.seed);
    ReducedBasis input_basis =
        empirical_pca(drawn.fields, problem.mass, "mass", std::min(d_in, n_basis - 1));
    ReducedBasis output_basis =
        empirical_pca(drawn.solutions, problem.h1, "h1", std::min(d_out, n_basis - 1));
    save_basis(input_basis, out_dir, "input_pca");
    save_basis(output_basis, out_dir, "output_pca");

    write_run_manifest(args, config, "basis", out_dir);
    std::cerr << "[surrbench] wrote Matern + PCA bases to " << out_dir << "\n";
    return 0;
}

int cmd_gen(const GlobalArgs& args) {
    Config config = load_config(args);
    const fs::path out_dir = args.out_dir;
    fs::create_directories(out_dir);

    ProblemSetup problem = problem_from_config(config);
    const int n = static_cast<int>(config.get_int("gen.n", 128));
    const bool with_jacobians = config.get_bool("gen.with_jacobians", false);
    const int d_in = static_cast<int>(config.get_int("gen.d_in", 25));
    const int d_out = static_cast<int>(config.get_int("gen.d_out", 25));
    const std::string encoder_kind = config.get_string("gen.encoder", "pca");
    const double s_tilde = config.get_double("gen.s_tilde", problem.spec.s);
    const auto seed = static_cast<std::uint64_t>(config.get_int("gen.seed", args.seed));

    DrawnSamples drawn = draw_and_solve(n, problem.spec, problem.ops, *problem.eigenbasis, seed);
    InputEncoder encoder = [&] {
        if (encoder_kind == "pca")
            return InputEncoder::pca(std::make_shared<ReducedBasis>(
                empirical_pca(drawn.fields, problem.mass, "mass", std::min(d_in, n - 1))));
        return InputEncoder::analytic(problem.eigenbasis, problem.mass, problem.spec.s, d_in,
                                      encoder_kind == "analytic_unit");
    }();
    ReducedBasis output_basis =
        empirical_pca(drawn.solutions, problem.h1, "h1", std::min(d_out, n - 1));
    TrainingDataset dataset =
        assemble_dataset(drawn, problem.ops, encoder, output_basis, with_jacobians, s_tilde);

    save_dataset(dataset, out_dir / "dataset");
    save_basis(output_basis, out_dir, "output_pca");
    write_run_manifest(args, config, "gen", out_dir);
    std::cerr << "[surrbench] wrote dataset (n=" << n << ", jacobians="
              << (with_jacobians ? "yes" : "no") << ") to " << out_dir << "\n";
    return 0;
}

SgSettings sg_from_config(const Config& config) {
    SgSettings settings;
    settings.a = config.get_double("sg.a", 2.0);
    settings.b = config.get_double("sg.b", 1.0);
    settings.ell = config.get_double("sg.ell", 0.0);
    settings.n_target = static_cast<int>(config.get_int("sg.n", settings.ell > 0 ? 0 : 120));
    settings.d_in = static_cast<int>(config.get_int("sg.d_in", 16));
    settings.d_out = static_cast<int>(config.get_int("sg.d_out", 25));
    return settings;
}

TtSettings tt_from_config(const Config& config) {
    TtSettings settings;
    settings.nu_max = static_cast<int>(config.get_int("tt.nu_max", 4));
    settings.anisotropic = config.get_bool("tt.aniso", true);
    settings.d_in = static_cast<int>(config.get_int("tt.d_in", 16));
    settings.d_out = static_cast<int>(config.get_int("tt.d_out", 25));
    settings.rank_cap = static_cast<int>(config.get_int("tt.rank_cap", 4));
    settings.sweeps = static_cast<int>(config.get_int("tt.sweeps", 2));
    settings.round_tol = config.get_double("tt.round_tol", 1e-10);
    settings.n_pilot = static_cast<int>(config.get_int("tt.n_pilot", 0));
    return settings;
}

NnSettings nn_from_config(const Config& config, const std::string& kind) {
    NnSettings settings;
    settings.width = static_cast<int>(config.get_int("nn.width", 48));
    settings.depth = static_cast<int>(config.get_int("nn.depth", 3));
    settings.objective = kind == "nn_h1" ? Objective::h1 : Objective::l2;
    settings.n = static_cast<int>(config.get_int("nn.n", 256));
    settings.d_in = static_cast<int>(config.get_int("nn.d_in", 25));
    settings.d_out = static_cast<int>(config.get_int("nn.d_out", 25));
    settings.epochs = static_cast<int>(config.get_int("nn.epochs", 500));
    settings.batch_size = static_cast<int>(config.get_int("nn.batch_size", 32));
    settings.encoder = config.get_string("nn.encoder", "pca");
    settings.activation = config.get_string("nn.activation", "gelu");
    settings.s_tilde = config.get_double("nn.s_tilde", -1.0);
    return settings;
}

int cmd_fit_eval(const GlobalArgs& args, bool do_fit, bool do_eval) {
    Config config = load_config(args);
    const fs::path out_dir = args.out_dir;
    fs::create_directories(out_dir);

    ProblemSetup problem = problem_from_config(config);
    TestSet test = test_set_from_config(config, problem, out_dir);
    EvalSettings eval = eval_from_config(config);
    const std::string kind = config.get_string("fit.kind", "sg");
    const auto seed = static_cast<std::uint64_t>(config.get_int("fit.seed", args.seed));

    const fs::path fit_dir = out_dir / "fit";
    BenchRecord record;
    if (kind == "sg")
        record = run_sg(problem, test, sg_from_config(config), eval, seed, &fit_dir);
    else if (kind == "tt")
        record = run_tt(problem, test, tt_from_config(config), eval, seed, &fit_dir);
    else if (kind == "nn_l2" || kind == "nn_h1")
        record = run_nn(problem, test, nn_from_config(config, kind), eval, seed, &fit_dir);
    else
        throw std::invalid_argument("unknown fit.kind: " + kind);

    if (record.status != "ok") {
        std::cerr << "[surrbench] " << kind << " did not produce a surrogate: " << record.status
                  << "\n";
        return 2;
    }
    if (do_eval) {
        write_records_csv({record}, out_dir / "records.csv");
        write_records_json({record}, out_dir / "records.json");
        std::cerr << "[surrbench] eval: eps_l2=" << record.eps_l2;
        if (record.eps_h1) std::cerr << " eps_h1=" << *record.eps_h1;
        std::cerr << " n=" << record.n << " N=" << record.parameter_count << "\n";
    }
    if (do_fit) std::cerr << "[surrbench] fit artifacts in " << fit_dir << "\n";
    write_run_manifest(args, config, do_fit && do_eval ? "fit+eval" : (do_fit ? "fit" : "eval"),
                       out_dir);
    return 0;
}

int cmd_ensemble(const GlobalArgs& args) {
    Config config = load_config(args);
    const fs::path out_dir = args.out_dir;
    fs::create_directories(out_dir);
    EnsembleResult result = run_ensemble(config, out_dir, args.threads);
    write_run_manifest(args, config, "ensemble", out_dir);
    int ok = 0, skipped = 0, failed = 0;
    for (const auto& record : result.records) {
        if (record.status == "ok")
            ++ok;
        else if (record.status.rfind("skipped", 0) == 0)
            ++skipped;
        else
            ++failed;
    }
    std::cerr << "[surrbench] ensemble: " << ok << " ok, " << skipped << " skipped, " << failed
              << " failed; report in " << out_dir << "\n";
    return 0;
}

int cmd_report(const GlobalArgs& args, const std::string& records_path) {
    if (!fs::exists(records_path))
        throw std::invalid_argument("records file not found: " + records_path);
    const fs::path out_dir = args.out_dir;
    fs::create_directories(out_dir);
    auto records = read_records_json(records_path);
    write_report(records, out_dir);
    std::cerr << "[surrbench] report written to " << out_dir << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"surrbench: reduced-basis surrogate benchmark for a parametric diffusion PDE"};
    app.require_subcommand(1);
    app.fallthrough();  // accept global options after the subcommand name

    GlobalArgs args;
    app.add_option("--config", args.config_path, "TOML-style configuration file");
    app.add_option("--out", args.out_dir, "output directory (default: out)");
    app.add_option("--seed", args.seed, "master seed (default: 1)");
    app.add_option("--threads", args.threads, "ensemble worker threads (default: 1)");
    app.add_flag("--full", args.full, "paper-scale defaults; long runtimes");

    auto* basis = app.add_subcommand("basis", "build and persist Matern + PCA bases");
    auto* gen = app.add_subcommand("gen", "generate a training dataset");
    auto* fit = app.add_subcommand("fit", "fit one surrogate from the config");
    auto* eval = app.add_subcommand("eval", "fit and score one surrogate on the test set");
    auto* ensemble = app.add_subcommand("ensemble", "run the hyperparameter ensemble");
    auto* report = app.add_subcommand("report", "records.json -> pareto/figure CSVs");
    std::string records_path = "out/records.json";
    report->add_option("--records", records_path, "records.json produced by eval/ensemble");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return 1;
    }

    try {
        if (basis->parsed()) return cmd_basis(args);
        if (gen->parsed()) return cmd_gen(args);
        if (fit->parsed()) return cmd_fit_eval(args, true, false);
        if (eval->parsed()) return cmd_fit_eval(args, true, true);
        if (ensemble->parsed()) return cmd_ensemble(args);
        if (report->parsed()) return cmd_report(args, records_path);
    } catch (const std::invalid_argument& e) {
        std::cerr << "[surrbench] config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "[surrbench] runtime failure: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
