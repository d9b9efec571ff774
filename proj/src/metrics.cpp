#include "surrbench/metrics.hpp"

#include "surrbench/io.hpp"
#include "surrbench/rng.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace surrbench {

using nlohmann::json;

double eps_l2mu(const Eigen::MatrixXd& reference, const Eigen::MatrixXd& predicted,
                const SparseMat& gram) {
    if (reference.rows() == 0) throw std::invalid_argument("empty test set");
    if (reference.rows() != predicted.rows() || reference.cols() != predicted.cols())
        throw std::invalid_argument("eps_l2mu: shape mismatch");
    double num = 0.0, den = 0.0;
    for (Eigen::Index k = 0; k < reference.rows(); ++k) {
        Eigen::VectorXd diff = (predicted.row(k) - reference.row(k)).transpose();
        Eigen::VectorXd ref = reference.row(k).transpose();
        num += diff.dot(gram * diff);
        den += ref.dot(gram * ref);
    }
    if (den <= 0.0) throw std::invalid_argument("eps_l2mu: reference norms vanish");
    return std::sqrt(num / den);
}

double eps_h1mu(const std::vector<Eigen::MatrixXd>& reference,
                const std::vector<Eigen::MatrixXd>& predicted,
                const Eigen::VectorXd& lambda_pow_s) {
    if (reference.empty() || reference.size() != predicted.size())
        throw std::invalid_argument("eps_h1mu: shape mismatch");
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < reference.size(); ++k) {
        if (reference[k].rows() != predicted[k].rows() ||
            reference[k].cols() != predicted[k].cols() ||
            reference[k].cols() != lambda_pow_s.size())
            throw std::invalid_argument("eps_h1mu: shape mismatch");
        for (Eigen::Index i = 0; i < lambda_pow_s.size(); ++i) {
            const double w2 = lambda_pow_s[i] * lambda_pow_s[i];
            num += w2 * (predicted[k].col(i) - reference[k].col(i)).squaredNorm();
            den += w2 * reference[k].col(i).squaredNorm();
        }
    }
    if (den <= 0.0) throw std::invalid_argument("eps_h1mu: reference seminorms vanish");
    return std::sqrt(num / den);
}

std::map<int, double> measure_eval_time(const BatchEval& eval, int d_in,
                                        const std::vector<int>& batch_sizes, int repeats,
                                        std::uint64_t seed) {
    if (repeats < 1) throw std::invalid_argument("repeats must be positive");
    Rng rng(seed);
    std::map<int, double> out;
    for (int batch : batch_sizes) {
        Eigen::MatrixXd points(batch, d_in);
        for (int r = 0; r < batch; ++r)
            for (int c = 0; c < d_in; ++c) points(r, c) = rng.symmetric();
        eval(points);  // warm-up, excluded
        std::vector<double> times;
        times.reserve(static_cast<std::size_t>(repeats));
        for (int rep = 0; rep < repeats; ++rep) {
            const auto start = std::chrono::steady_clock::now();
            eval(points);
            const auto stop = std::chrono::steady_clock::now();
            times.push_back(std::chrono::duration<double>(stop - start).count() / batch);
        }
        std::sort(times.begin(), times.end());
        out[batch] = times[times.size() / 2];
    }
    return out;
}

double cost_of(const BenchRecord& record, CostAxis axis) {
    switch (axis) {
        case CostAxis::n: return static_cast<double>(record.n);
        case CostAxis::parameter_count: return static_cast<double>(record.parameter_count);
        case CostAxis::t_train: return record.t_train;
        case CostAxis::t_eval: return record.t_eval;
    }
    return 0.0;
}

std::optional<double> error_of(const BenchRecord& record, ErrorAxis axis) {
    if (axis == ErrorAxis::l2) return record.eps_l2;
    return record.eps_h1;
}

std::vector<BenchRecord> pareto_frontier(const std::vector<BenchRecord>& records, CostAxis cost,
                                         ErrorAxis error) {
    if (records.empty()) throw std::invalid_argument("pareto_frontier: no records");
    struct Item {
        double cost;
        double error;
        std::size_t original;
    };
    std::vector<Item> items;
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (records[i].status != "ok") continue;
        const auto err = error_of(records[i], error);
        if (!err) continue;
        items.push_back({cost_of(records[i], cost), *err, i});
    }
    std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) {
        if (a.cost != b.cost) return a.cost < b.cost;
        if (a.error != b.error) return a.error < b.error;
        return a.original < b.original;
    });

    std::vector<BenchRecord> frontier;
    double best_error = std::numeric_limits<double>::infinity();
    std::size_t group_begin = 0;
    while (group_begin < items.size()) {
        std::size_t group_end = group_begin;
        while (group_end < items.size() && items[group_end].cost == items[group_begin].cost)
            ++group_end;
        const double group_min = items[group_begin].error;  // sorted within the group
        if (group_min < best_error) {
            for (std::size_t i = group_begin; i < group_end; ++i) {
                if (items[i].error == group_min)
                    frontier.push_back(records[items[i].original]);
            }
            best_error = group_min;
        }
        group_begin = group_end;
    }
    return frontier;
}

namespace {

std::string csv_escape(const std::string& value) {
    if (value.find_first_of(",\"\n") == std::string::npos) return value;
    std::string out = "\"";
    for (char c : value) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

std::string hyper_text(const BenchRecord& record) {
    std::string out;
    for (const auto& [key, value] : record.hyper) {
        if (!out.empty()) out += ";";
        out += key + "=" + value;
    }
    return out;
}

constexpr const char* kRecordsHeader =
    "kind,status,seed,n,n_jac,parameter_count,t_train_s,t_eval_s,t_eval_batch,eps_l2,eps_h1,"
    "hyperparameters";

std::string record_row(const BenchRecord& record) {
    std::ostringstream row;
    row.precision(17);
    row << record.kind << ',' << csv_escape(record.status) << ',' << record.seed << ','
        << record.n << ',' << record.n_jac << ',' << record.parameter_count << ','
        << record.t_train << ',' << record.t_eval << ',' << record.t_eval_batch << ','
        << record.eps_l2 << ',';
    if (record.eps_h1) row << *record.eps_h1;
    row << ',' << csv_escape(hyper_text(record));
    return row.str();
}

json record_to_json(const BenchRecord& record) {
    json j;
    j["kind"] = record.kind;
    j["status"] = record.status;
    j["seed"] = record.seed;
    j["n"] = record.n;
    j["n_jac"] = record.n_jac;
    j["parameter_count"] = record.parameter_count;
    j["t_train_s"] = record.t_train;
    j["t_eval_s"] = record.t_eval;
    j["t_eval_batch"] = record.t_eval_batch;
    j["eps_l2"] = record.eps_l2;
    if (record.eps_h1)
        j["eps_h1"] = *record.eps_h1;
    else
        j["eps_h1"] = nullptr;
    j["hyperparameters"] = record.hyper;
    return j;
}

BenchRecord record_from_json(const json& j) {
    BenchRecord record;
    record.kind = j.at("kind").get<std::string>();
    record.status = j.at("status").get<std::string>();
    record.seed = j.at("seed").get<std::uint64_t>();
    record.n = j.at("n").get<long>();
    record.n_jac = j.at("n_jac").get<long>();
    record.parameter_count = j.at("parameter_count").get<std::int64_t>();
    record.t_train = j.at("t_train_s").get<double>();
    record.t_eval = j.at("t_eval_s").get<double>();
    record.t_eval_batch = j.at("t_eval_batch").get<int>();
    record.eps_l2 = j.at("eps_l2").get<double>();
    if (!j.at("eps_h1").is_null()) record.eps_h1 = j.at("eps_h1").get<double>();
    record.hyper = j.at("hyperparameters").get<std::map<std::string, std::string>>();
    return record;
}

}  // namespace

void write_records_csv(const std::vector<BenchRecord>& records,
                       const std::filesystem::path& file) {
    std::string text = std::string(kRecordsHeader) + "\n";
    for (const auto& record : records) text += record_row(record) + "\n";
    io::write_text(file, text);
}

void write_records_json(const std::vector<BenchRecord>& records,
                        const std::filesystem::path& file) {
    json all = json::array();
    for (const auto& record : records) all.push_back(record_to_json(record));
    io::write_text(file, all.dump(2) + "\n");
}

std::vector<BenchRecord> read_records_json(const std::filesystem::path& file) {
    const json all = json::parse(io::read_text(file));
    std::vector<BenchRecord> records;
    for (const auto& j : all) records.push_back(record_from_json(j));
    return records;
}

void write_report(const std::vector<BenchRecord>& records, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_records_csv(records, dir / "records.csv");
    write_records_json(records, dir / "records.json");

    const std::pair<CostAxis, std::string> axes[] = {
        {CostAxis::n, "n"},
        {CostAxis::t_eval, "t_eval_s"},
        {CostAxis::parameter_count, "parameter_count"},
        {CostAxis::t_train, "t_train_s"},
    };
    for (const auto& [axis, name] : axes) {
        std::string text = "kind,seed," + name + ",eps_l2,eps_h1,hyperparameters\n";
        for (const auto& record : records) {
            if (record.status != "ok") continue;
            std::ostringstream row;
            row.precision(17);
            row << record.kind << ',' << record.seed << ',' << cost_of(record, axis) << ','
                << record.eps_l2 << ',';
            if (record.eps_h1) row << *record.eps_h1;
            row << ',' << csv_escape(hyper_text(record)) << '\n';
            text += row.str();
        }
        io::write_text(dir / ("fig_eps_vs_" + name + ".csv"), text);
    }

    bool any_ok = std::any_of(records.begin(), records.end(),
                              [](const BenchRecord& r) { return r.status == "ok"; });
    std::string pareto_text = std::string("cost_axis,") + kRecordsHeader + "\n";
    if (any_ok) {
        for (const auto& [axis, name] : axes) {
            for (const auto& record : pareto_frontier(records, axis, ErrorAxis::l2))
                pareto_text += name + "," + record_row(record) + "\n";
        }
    }
    io::write_text(dir / "pareto.csv", pareto_text);
}

}  // namespace surrbench
