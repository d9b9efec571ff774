#include "surrbench/bench.hpp"

#include "surrbench/io.hpp"
#include "surrbench/rng.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <chrono>
#include <cmath>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

namespace surrbench {

using nlohmann::json;

namespace {

double seconds_since(const std::chrono::steady_clock::time_point& start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string format_double(double value) {
    std::ostringstream out;
    out.precision(12);
    out << value;
    return out.str();
}

// timed sections (training/setup and t_eval measurements) are serialized so
// parallel ensemble entries cannot distort each other's clocks
std::mutex& timing_mutex() {
    static std::mutex mutex;
    return mutex;
}

}  // namespace

ProblemSetup make_problem(int grid_n, double s, int d_true, double gamma, double delta) {
    ProblemSetup problem;
    problem.grid = Grid2D(grid_n);
    problem.ops = assemble_fem(problem.grid);
    problem.spec = SmoothnessSpec{s, d_true};
    problem.gamma = gamma;
    problem.delta = delta;
    auto pairs = matern_eigenbasis(problem.ops, gamma, delta, d_true);
    problem.eigenbasis = std::make_shared<Eigen::MatrixXd>(eigenbasis_matrix(pairs));
    problem.mass = std::make_shared<SparseMat>(problem.ops.mass);
    problem.h1 = std::make_shared<SparseMat>(problem.ops.h1_gram);
    return problem;
}

TestSet build_test_set(const ProblemSetup& problem, int k, int h1_directions,
                       std::uint64_t seed) {
    if (k < 1) throw std::invalid_argument("test set needs at least one sample");
    TestSet set;
    set.seed = seed;
    set.h1_directions = h1_directions;
    const int dof = problem.grid.dof_count();
    set.coeffs.resize(k, problem.spec.d_true);
    set.fields.resize(k, dof);
    set.solutions.resize(k, dof);
    for (int i = 0; i < k; ++i) {
        auto sample = sample_ks(problem.spec, *problem.eigenbasis,
                                derive_seed(seed, static_cast<std::uint64_t>(i)));
        set.coeffs.row(i) = sample.coeffs.transpose();
        set.fields.row(i) = sample.field.transpose();
        DiffusionSystem system(problem.ops, sample.field);
        set.solutions.row(i) = system.solve_forward().transpose();
        if (h1_directions > 0) {
            Eigen::MatrixXd tangent(dof, h1_directions);
            for (int j = 0; j < h1_directions; ++j) {
                const double scale = problem.spec.lambda_pow_s(j + 1);
                tangent.col(j) =
                    system.solve_tangent(scale * problem.eigenbasis->col(j));
            }
            set.tangents.push_back(std::move(tangent));
        }
    }
    return set;
}

void save_test_set(const TestSet& set, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    json manifest;
    manifest["kind"] = "test_set";
    manifest["k"] = set.size();
    manifest["d_true"] = set.coeffs.cols();
    manifest["dof"] = set.fields.cols();
    manifest["h1_directions"] = set.h1_directions;
    manifest["seed"] = set.seed;
    io::write_text(dir / "manifest.json", manifest.dump(2) + "\n");
    io::write_matrix_rowmajor(dir / "coeffs.bin", set.coeffs);
    io::write_matrix_rowmajor(dir / "fields.bin", set.fields);
    io::write_matrix_rowmajor(dir / "solutions.bin", set.solutions);
    if (set.h1_directions > 0) {
        std::vector<double> flat;
        for (const auto& tangent : set.tangents)
            for (Eigen::Index i = 0; i < tangent.rows(); ++i)
                for (Eigen::Index j = 0; j < tangent.cols(); ++j) flat.push_back(tangent(i, j));
        io::write_f64(dir / "tangents.bin", flat.data(), flat.size());
    }
}

std::optional<TestSet> try_load_test_set(const std::filesystem::path& dir,
                                         const ProblemSetup& problem, int k, int h1_directions,
                                         std::uint64_t seed) {
    if (!std::filesystem::exists(dir / "manifest.json")) return std::nullopt;
    const json manifest = json::parse(io::read_text(dir / "manifest.json"));
    if (manifest.value("kind", "") != "test_set") return std::nullopt;
    if (manifest.at("k").get<int>() != k || manifest.at("seed").get<std::uint64_t>() != seed ||
        manifest.at("h1_directions").get<int>() != h1_directions ||
        manifest.at("d_true").get<int>() != problem.spec.d_true ||
        manifest.at("dof").get<int>() != problem.grid.dof_count())
        return std::nullopt;

    TestSet set;
    set.seed = seed;
    set.h1_directions = h1_directions;
    const int dof = problem.grid.dof_count();
    set.coeffs = io::read_matrix_rowmajor(dir / "coeffs.bin", k, problem.spec.d_true);
    set.fields = io::read_matrix_rowmajor(dir / "fields.bin", k, dof);
    set.solutions = io::read_matrix_rowmajor(dir / "solutions.bin", k, dof);
    if (h1_directions > 0) {
        const auto flat = io::read_f64(dir / "tangents.bin");
        if (static_cast<Eigen::Index>(flat.size()) !=
            static_cast<Eigen::Index>(k) * dof * h1_directions)
            return std::nullopt;
        std::size_t pos = 0;
        for (int sample = 0; sample < k; ++sample) {
            Eigen::MatrixXd tangent(dof, h1_directions);
            for (Eigen::Index i = 0; i < dof; ++i)
                for (Eigen::Index j = 0; j < h1_directions; ++j) tangent(i, j) = flat[pos++];
            set.tangents.push_back(std::move(tangent));
        }
    }
    return set;
}

TestSet shared_test_set(const ProblemSetup& problem, int k, int h1_directions, std::uint64_t seed,
                        const std::filesystem::path& cache_dir) {
    std::ostringstream name;
    name << "grid" << problem.grid.n_cells << "_s" << problem.spec.s << "_k" << k << "_j"
         << h1_directions << "_seed" << seed;
    const auto dir = cache_dir / name.str();
    if (auto cached = try_load_test_set(dir, problem, k, h1_directions, seed)) return *cached;
    TestSet set = build_test_set(problem, k, h1_directions, seed);
    save_test_set(set, dir);
    return set;
}

namespace {

// reference Jacobian of the truncated coefficient map in the generating
// coordinates: column i = <tangent_i, eta_j>_G
std::vector<Eigen::MatrixXd> reference_jacobians(const TestSet& test, const ReducedBasis& basis,
                                                 int d_in) {
    std::vector<Eigen::MatrixXd> out;
    out.reserve(test.tangents.size());
    for (const auto& tangent : test.tangents) {
        Eigen::MatrixXd jac(basis.rank(), d_in);
        for (int i = 0; i < d_in; ++i) jac.col(i) = encode_tangent(basis, tangent.col(i));
        out.push_back(std::move(jac));
    }
    return out;
}

double eps_l2_from_coeff_predictions(const TestSet& test, const ReducedBasis& basis,
                                     const Eigen::MatrixXd& coeff_predictions,
                                     const SparseMat& gram) {
    Eigen::MatrixXd predicted(test.size(), test.solutions.cols());
    for (int k = 0; k < test.size(); ++k)
        predicted.row(k) = decode(basis, coeff_predictions.row(k).transpose()).transpose();
    return eps_l2mu(test.solutions, predicted, gram);
}

// t_eval measures coefficient evaluation plus the decode back to a field
template <typename EvalFn>
std::pair<double, int> timed_eval(const EvalFn& eval_batch, const ReducedBasis& basis, int d_in,
                                  const EvalSettings& eval, std::uint64_t seed) {
    BatchEval wrapped = [&](const Eigen::MatrixXd& points) {
        Eigen::MatrixXd coeffs = eval_batch(points);
        Eigen::MatrixXd fields = (basis.basis * coeffs.transpose()).colwise() + basis.mean;
        // fold the result so the work cannot be optimized away
        volatile double sink = fields.sum();
        (void)sink;
    };
    auto timing = measure_eval_time(wrapped, d_in, eval.batch_sizes, eval.repeats, seed);
    const int batch = eval.batch_sizes.back();
    return {timing.at(batch), batch};
}

}  // namespace

BenchRecord run_sg(const ProblemSetup& problem, const TestSet& test, const SgSettings& settings,
                   const EvalSettings& eval, std::uint64_t seed,
                   const std::filesystem::path* save_dir) {
    BenchRecord record;
    record.kind = "sg";
    record.seed = seed;
    record.hyper = {{"a", format_double(settings.a)},
                    {"b", format_double(settings.b)},
                    {"d_in", std::to_string(settings.d_in)},
                    {"d_out", std::to_string(settings.d_out)}};

    MultiIndexSet set;
    try {
        set = settings.n_target > 0
                  ? build_index_set_with_size(settings.a, settings.b, settings.d_in,
                                              settings.n_target)
                  : build_index_set(settings.a, settings.b, settings.ell, settings.d_in);
    } catch (const std::invalid_argument& e) {
        record.status = std::string("skipped:") + e.what();
        return record;
    }
    record.hyper["ell"] = format_double(set.ell);
    record.hyper["n_lambda"] = std::to_string(set.size());

    const NodeFamily nodes = leja_nodes(set.max_entry() + 1);
    const InputEncoder encoder = InputEncoder::analytic(problem.eigenbasis, problem.mass,
                                                        problem.spec.s, settings.d_in, true);

    // probe all grid points (= set members, nested nodes); solves are data cost
    const int n_points = static_cast<int>(set.size());
    Eigen::MatrixXd fields(problem.grid.dof_count(), n_points);
    for (int row = 0; row < n_points; ++row) {
        Eigen::VectorXd c(settings.d_in);
        for (int k = 0; k < settings.d_in; ++k) c[k] = nodes.nodes[set[row][k]];
        DiffusionSystem system(problem.ops, encoder.decode(c));
        fields.col(row) = system.solve_forward();
    }
    record.n = n_points;

    std::lock_guard<std::mutex> lock(timing_mutex());
    const auto setup_start = std::chrono::steady_clock::now();
    const int d_out = std::min(settings.d_out, n_points - 1);
    ReducedBasis output_basis = empirical_pca(fields, problem.h1, "h1", d_out);
    int cursor = 0;
    VectorProbe probe = [&](const Eigen::VectorXd&) {
        return encode(output_basis, fields.col(cursor++)).eval();
    };
    SparseGridSurrogate surrogate = build_sg_surrogate(probe, set, nodes);
    record.t_train = seconds_since(setup_start);
    record.parameter_count = surrogate.parameter_count();

    Eigen::MatrixXd test_points = test.coeffs.leftCols(settings.d_in);
    Eigen::MatrixXd coeff_predictions = surrogate.eval_batch(test_points);
    record.eps_l2 =
        eps_l2_from_coeff_predictions(test, output_basis, coeff_predictions, *problem.h1);

    if (test.h1_directions >= settings.d_in) {
        auto reference = reference_jacobians(test, output_basis, settings.d_in);
        std::vector<Eigen::MatrixXd> predicted;
        predicted.reserve(reference.size());
        for (int k = 0; k < test.size(); ++k)
            predicted.push_back(surrogate.jacobian(test_points.row(k).transpose()));
        record.eps_h1 =
            eps_h1mu(reference, predicted, Eigen::VectorXd::Ones(settings.d_in));
    }

    auto [t_eval, batch] = timed_eval(
        [&](const Eigen::MatrixXd& points) { return surrogate.eval_batch(points); },
        output_basis, settings.d_in, eval, seed ^ 0x7157ULL);
    record.t_eval = t_eval;
    record.t_eval_batch = batch;

    if (save_dir) {
        surrogate.save(*save_dir / "surrogate");
        save_basis(output_basis, *save_dir, "output");
    }
    return record;
}

BenchRecord run_tt(const ProblemSetup& problem, const TestSet& test, const TtSettings& settings,
                   const EvalSettings& eval, std::uint64_t seed,
                   const std::filesystem::path* save_dir) {
    BenchRecord record;
    record.kind = "tt";
    record.seed = seed;
    record.hyper = {{"nu_max", std::to_string(settings.nu_max)},
                    {"aniso", settings.anisotropic ? "true" : "false"},
                    {"rank_cap", std::to_string(settings.rank_cap)},
                    {"sweeps", std::to_string(settings.sweeps)},
                    {"d_out", std::to_string(settings.d_out)}};

    DegreeSchedule schedule = degree_schedule(settings.nu_max, settings.anisotropic,
                                              settings.d_in);
    const int d_in = schedule.dims();
    record.hyper["d_in"] = std::to_string(d_in);
    const NodeFamily nodes = leja_nodes(settings.nu_max + 1);
    const InputEncoder encoder =
        InputEncoder::analytic(problem.eigenbasis, problem.mass, problem.spec.s, d_in, true);

    // pilot solves at random cube points provide the output basis; they are
    // counted in n like every other solve
    const int n_pilot = settings.n_pilot > 0 ? settings.n_pilot : 2 * settings.d_out + 8;
    Rng rng(derive_seed(seed, 0x91));
    Eigen::MatrixXd pilot_fields(problem.grid.dof_count(), n_pilot);
    for (int k = 0; k < n_pilot; ++k) {
        Eigen::VectorXd c(d_in);
        for (int i = 0; i < d_in; ++i) c[i] = rng.symmetric();
        DiffusionSystem system(problem.ops, encoder.decode(c));
        pilot_fields.col(k) = system.solve_forward();
    }
    const int d_out = std::min(settings.d_out, n_pilot - 1);
    ReducedBasis output_basis = empirical_pca(pilot_fields, problem.h1, "h1", d_out);

    std::lock_guard<std::mutex> lock(timing_mutex());
    ProbeOperator probe(problem.ops, encoder, output_basis);
    VectorProbe cross_probe = [&](const Eigen::VectorXd& c) { return probe(c); };
    TtCrossOptions options;
    options.rank_cap = settings.rank_cap;
    options.sweeps = settings.sweeps;
    options.seed = derive_seed(seed, 0xcc);

    const auto setup_start = std::chrono::steady_clock::now();
    TensorTrainSurrogate surrogate = build_tt_surrogate(
        cross_probe, output_basis.rank(), schedule, nodes, options, settings.round_tol);
    // t_train excludes the PDE solve time spent inside the cross probes
    record.t_train = seconds_since(setup_start) - probe.solve_seconds();
    record.n = n_pilot + probe.solve_count();
    record.parameter_count = surrogate.parameter_count();
    record.hyper["converged"] = surrogate.converged() ? "true" : "false";

    Eigen::MatrixXd test_points = test.coeffs.leftCols(d_in);
    Eigen::MatrixXd coeff_predictions = surrogate.eval_batch(test_points);
    record.eps_l2 =
        eps_l2_from_coeff_predictions(test, output_basis, coeff_predictions, *problem.h1);

    if (test.h1_directions >= d_in) {
        auto reference = reference_jacobians(test, output_basis, d_in);
        std::vector<Eigen::MatrixXd> predicted;
        predicted.reserve(reference.size());
        for (int k = 0; k < test.size(); ++k)
            predicted.push_back(surrogate.jacobian(test_points.row(k).transpose()));
        record.eps_h1 = eps_h1mu(reference, predicted, Eigen::VectorXd::Ones(d_in));
    }

    auto [t_eval, batch] = timed_eval(
        [&](const Eigen::MatrixXd& points) { return surrogate.eval_batch(points); },
        output_basis, d_in, eval, seed ^ 0x7157ULL);
    record.t_eval = t_eval;
    record.t_eval_batch = batch;

    if (save_dir) {
        surrogate.save(*save_dir / "surrogate");
        save_basis(output_basis, *save_dir, "output");
    }
    return record;
}

BenchRecord run_nn(const ProblemSetup& problem, const TestSet& test, const NnSettings& settings,
                   const EvalSettings& eval, std::uint64_t seed,
                   const std::filesystem::path* save_dir) {
    BenchRecord record;
    record.kind = settings.objective == Objective::l2 ? "nn_l2" : "nn_h1";
    record.seed = seed;
    record.hyper = {{"width", std::to_string(settings.width)},
                    {"depth", std::to_string(settings.depth)},
                    {"n", std::to_string(settings.n)},
                    {"d_in", std::to_string(settings.d_in)},
                    {"d_out", std::to_string(settings.d_out)},
                    {"encoder", settings.encoder},
                    {"activation", settings.activation},
                    {"epochs", std::to_string(settings.epochs)}};

    const double s_tilde = settings.s_tilde < 0 ? problem.spec.s : settings.s_tilde;
    const bool with_jacobians = settings.objective == Objective::h1;

    DrawnSamples drawn =
        draw_and_solve(settings.n, problem.spec, problem.ops, *problem.eigenbasis,
                       derive_seed(seed, 0xdaaa));
    const int d_in = std::min(settings.d_in, settings.n - 1);
    const int d_out = std::min(settings.d_out, settings.n - 1);

    InputEncoder encoder = [&] {
        if (settings.encoder == "pca") {
            auto input_basis = std::make_shared<ReducedBasis>(
                empirical_pca(drawn.fields, problem.mass, "mass", d_in));
            return InputEncoder::pca(input_basis);
        }
        const bool unit = settings.encoder == "analytic_unit";
        if (!unit && settings.encoder != "analytic")
            throw std::invalid_argument("unknown encoder kind: " + settings.encoder);
        return InputEncoder::analytic(problem.eigenbasis, problem.mass, problem.spec.s, d_in,
                                      unit);
    }();
    ReducedBasis output_basis = empirical_pca(drawn.solutions, problem.h1, "h1", d_out);

    TrainingDataset dataset =
        assemble_dataset(drawn, problem.ops, encoder, output_basis, with_jacobians, s_tilde);
    record.n = dataset.n_solves;
    record.n_jac = dataset.n_tangent;

    std::vector<int> dims;
    dims.push_back(encoder.dim());
    for (int l = 0; l < settings.depth; ++l) dims.push_back(settings.width);
    dims.push_back(output_basis.rank());

    TrainConfig config;
    config.objective = settings.objective;
    config.s_tilde = s_tilde;
    config.epochs = settings.epochs;
    config.batch_size = settings.batch_size;
    config.seed = derive_seed(seed, 0x11);

    std::lock_guard<std::mutex> lock(timing_mutex());
    MlpSurrogate init =
        make_mlp(dims, activation_from_string(settings.activation), derive_seed(seed, 0x22));
    TrainResult trained = train(init, dataset.data, config);
    record.t_train = trained.train_seconds;
    record.parameter_count = trained.net.parameter_count();

    // encode the test fields, run the net, decode, compare
    Eigen::MatrixXd encoded(test.size(), encoder.dim());
    for (int k = 0; k < test.size(); ++k)
        encoded.row(k) = encoder.encode(test.fields.row(k).transpose()).transpose();
    Eigen::MatrixXd coeff_predictions = mlp_forward_batch(trained.net, encoded);
    record.eps_l2 =
        eps_l2_from_coeff_predictions(test, output_basis, coeff_predictions, *problem.h1);

    if (test.h1_directions > 0) {
        // chain rule into the shared generating directions
        const int d_jac = test.h1_directions;
        Eigen::MatrixXd chain(encoder.dim(), d_jac);
        for (int i = 0; i < d_jac; ++i) {
            const double scale = problem.spec.lambda_pow_s(i + 1);
            chain.col(i) = encoder.encode(scale * problem.eigenbasis->col(i)) -
                           encoder.encode(Eigen::VectorXd::Zero(problem.grid.dof_count()));
        }
        auto reference = reference_jacobians(test, output_basis, d_jac);
        std::vector<Eigen::MatrixXd> predicted;
        predicted.reserve(reference.size());
        for (int k = 0; k < test.size(); ++k) {
            Eigen::MatrixXd jac = mlp_input_jacobian(trained.net, encoded.row(k).transpose());
            predicted.push_back(jac * chain);
        }
        record.eps_h1 = eps_h1mu(reference, predicted, Eigen::VectorXd::Ones(d_jac));
    }

    auto [t_eval, batch] = timed_eval(
        [&](const Eigen::MatrixXd& points) { return mlp_forward_batch(trained.net, points); },
        output_basis, encoder.dim(), eval, seed ^ 0x7157ULL);
    record.t_eval = t_eval;
    record.t_eval_batch = batch;

    if (save_dir) {
        save_mlp(trained.net, *save_dir / "surrogate");
        write_trace_csv(trained.trace, *save_dir / "trace.csv");
        save_basis(output_basis, *save_dir, "output");
    }
    return record;
}

namespace {

struct EnsembleTask {
    std::function<BenchRecord()> run;
    std::string label;
};

}  // namespace

EnsembleResult run_ensemble(const Config& config, const std::filesystem::path& out_dir,
                            int threads) {
    const int grid_n = static_cast<int>(config.get_int("problem.grid_n", 32));
    const double s = config.get_double("problem.s", 3.0);
    const int d_true = static_cast<int>(config.get_int("problem.d_true", 256));
    const double gamma = config.get_double("problem.gamma", 0.1);
    const double delta = config.get_double("problem.delta", 0.5);

    ProblemSetup problem = make_problem(grid_n, s, d_true, gamma, delta);

    const int k = static_cast<int>(config.get_int("test_set.k", 128));
    const int h1_directions = static_cast<int>(config.get_int("test_set.h1_directions", 0));
    const auto test_seed = static_cast<std::uint64_t>(config.get_int("test_set.seed", 9001));
    TestSet test =
        shared_test_set(problem, k, h1_directions, test_seed, out_dir / "test_sets");

    EvalSettings eval;
    eval.batch_sizes.clear();
    for (double b : config.get_double_list("eval.batch_sizes", {1, 128}))
        eval.batch_sizes.push_back(static_cast<int>(b));
    eval.repeats = static_cast<int>(config.get_int("eval.repeats", 3));

    std::vector<std::string> kinds =
        config.get_string_list("ensemble.kinds", {"sg", "tt", "nn_l2", "nn_h1"});
    std::vector<double> seeds = config.get_double_list("ensemble.seeds", {1});

    std::vector<EnsembleTask> tasks;
    for (double seed_value : seeds) {
        const auto seed = static_cast<std::uint64_t>(seed_value);
        for (const auto& kind : kinds) {
            if (kind == "sg") {
                for (double a : config.get_double_list("sg.a", {0.5, 1.2}))
                    for (double b : config.get_double_list("sg.b", {1.2}))
                        for (double n_target : config.get_double_list("sg.n", {120})) {
                            SgSettings settings;
                            settings.a = a;
                            settings.b = b;
                            settings.n_target = static_cast<int>(n_target);
                            settings.d_in = static_cast<int>(config.get_int("sg.d_in", 16));
                            settings.d_out = static_cast<int>(config.get_int("sg.d_out", 25));
                            std::ostringstream label;
                            label << "sg a=" << a << " b=" << b << " n=" << n_target
                                  << " seed=" << seed;
                            tasks.push_back({[=, &problem, &test]() {
                                                 return run_sg(problem, test, settings, eval,
                                                               seed);
                                             },
                                             label.str()});
                        }
            } else if (kind == "tt") {
                for (double nu_max : config.get_double_list("tt.nu_max", {4}))
                    for (double rank_cap : config.get_double_list("tt.rank_cap", {3, 5})) {
                        TtSettings settings;
                        settings.nu_max = static_cast<int>(nu_max);
                        settings.rank_cap = static_cast<int>(rank_cap);
                        settings.anisotropic = config.get_bool("tt.aniso", true);
                        settings.d_in = static_cast<int>(config.get_int("tt.d_in", 16));
                        settings.d_out = static_cast<int>(config.get_int("tt.d_out", 25));
                        settings.sweeps = static_cast<int>(config.get_int("tt.sweeps", 2));
                        settings.round_tol = config.get_double("tt.round_tol", 1e-10);
                        settings.n_pilot = static_cast<int>(config.get_int("tt.n_pilot", 0));
                        std::ostringstream label;
                        label << "tt nu_max=" << nu_max << " rank_cap=" << rank_cap
                              << " seed=" << seed;
                        tasks.push_back({[=, &problem, &test]() {
                                             return run_tt(problem, test, settings, eval, seed);
                                         },
                                         label.str()});
                    }
            } else if (kind == "nn_l2" || kind == "nn_h1") {
                for (double width : config.get_double_list("nn.width", {48}))
                    for (double depth : config.get_double_list("nn.depth", {3}))
                        for (double n : config.get_double_list("nn.n", {256})) {
                            NnSettings settings;
                            settings.width = static_cast<int>(width);
                            settings.depth = static_cast<int>(depth);
                            settings.n = static_cast<int>(n);
                            settings.objective =
                                kind == "nn_l2" ? Objective::l2 : Objective::h1;
                            settings.d_in = static_cast<int>(config.get_int("nn.d_in", 25));
                            settings.d_out = static_cast<int>(config.get_int("nn.d_out", 25));
                            settings.epochs = static_cast<int>(config.get_int("nn.epochs", 500));
                            settings.batch_size =
                                static_cast<int>(config.get_int("nn.batch_size", 32));
                            settings.encoder = config.get_string("nn.encoder", "pca");
                            settings.activation = config.get_string("nn.activation", "gelu");
                            settings.s_tilde = config.get_double("nn.s_tilde", -1.0);
                            std::ostringstream label;
                            label << kind << " width=" << width << " depth=" << depth
                                  << " n=" << n << " seed=" << seed;
                            tasks.push_back({[=, &problem, &test]() {
                                                 return run_nn(problem, test, settings, eval,
                                                               seed);
                                             },
                                             label.str()});
                        }
            } else {
                throw std::invalid_argument("unknown surrogate kind in ensemble: " + kind);
            }
        }
    }

    // work queue with bounded parallelism; timed sections hold a shared lock
    std::vector<BenchRecord> records(tasks.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        while (true) {
            const std::size_t index = next.fetch_add(1);
            if (index >= tasks.size()) break;
            std::cerr << "[ensemble] " << tasks[index].label << "\n";
            try {
                records[index] = tasks[index].run();
            } catch (const std::exception& e) {
                BenchRecord failed;
                failed.kind = tasks[index].label.substr(0, tasks[index].label.find(' '));
                failed.status = std::string("failed:") + e.what();
                records[index] = failed;
            }
        }
    };
    const int worker_count = std::max(1, threads);
    std::vector<std::thread> pool;
    for (int t = 1; t < worker_count; ++t) pool.emplace_back(worker);
    worker();
    for (auto& thread : pool) thread.join();

    write_report(records, out_dir);
    return {records};
}

}  // namespace surrbench
