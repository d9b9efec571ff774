#include "surrbench/metrics.hpp"
#include "surrbench/rng.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <chrono>
#include <cmath>
#include <set>
#include <thread>

using namespace surrbench;

namespace {

SparseMat identity_gram(int m) {
    SparseMat gram(m, m);
    gram.setIdentity();
    return gram;
}

// brute-force dominance oracle
std::vector<std::size_t> pareto_oracle(const std::vector<BenchRecord>& records, CostAxis cost,
                                       ErrorAxis error) {
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < records.size(); ++i) {
        bool dominated = false;
        for (std::size_t j = 0; j < records.size() && !dominated; ++j) {
            if (i == j) continue;
            const double ci = cost_of(records[i], cost);
            const double cj = cost_of(records[j], cost);
            const double ei = *error_of(records[i], error);
            const double ej = *error_of(records[j], error);
            dominated = cj <= ci && ej <= ei && (cj < ci || ej < ei);
        }
        if (!dominated) keep.push_back(i);
    }
    return keep;
}

BenchRecord make_record(double n, double eps) {
    BenchRecord record;
    record.kind = "stub";
    record.n = static_cast<long>(n);
    record.eps_l2 = eps;
    record.eps_h1 = eps * 2;
    return record;
}

}  // namespace

TEST_CASE("eps_l2mu: closed-form cases") {
    SparseMat gram = identity_gram(3);
    Rng rng(3);
    Eigen::MatrixXd reference(4, 3);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 3; ++j) reference(i, j) = rng.symmetric();

    SECTION("exact surrogate gives zero") {
        CHECK(eps_l2mu(reference, reference, gram) == 0.0);
    }
    SECTION("zero surrogate gives one") {
        CHECK_THAT(eps_l2mu(reference, Eigen::MatrixXd::Zero(4, 3), gram),
                   Catch::Matchers::WithinRel(1.0, 1e-14));
    }
    SECTION("two-sample scalar hand case") {
        SparseMat one = identity_gram(1);
        Eigen::MatrixXd ref(2, 1), pred(2, 1);
        ref << 2.0, 1.0;          // |y1| = 2, |y2| = 1
        pred << 2.0 - 1.0, 1.0 - 2.0;  // |e1| = 1, |e2| = 2
        CHECK_THAT(eps_l2mu(ref, pred, one), Catch::Matchers::WithinRel(1.0, 1e-14));
    }
    SECTION("all-zero reference throws") {
        CHECK_THROWS(eps_l2mu(Eigen::MatrixXd::Zero(4, 3), reference, gram));
    }
}

TEST_CASE("eps_l2mu is invariant under test-set permutation and basis rotation") {
    Rng rng(7);
    const int k = 6, m = 5;
    Eigen::MatrixXd reference(k, m), predicted(k, m);
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < m; ++j) {
            reference(i, j) = rng.symmetric();
            predicted(i, j) = rng.symmetric();
        }
    SparseMat gram = identity_gram(m);
    const double base = eps_l2mu(reference, predicted, gram);

    // permutation of rows
    Eigen::MatrixXd ref_perm = reference.colwise().reverse();
    Eigen::MatrixXd pred_perm = predicted.colwise().reverse();
    CHECK_THAT(eps_l2mu(ref_perm, pred_perm, gram), Catch::Matchers::WithinRel(base, 1e-13));

    // orthonormal change of the coefficient basis leaves the G-norm intact
    Eigen::MatrixXd random(m, m);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) random(i, j) = rng.symmetric();
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(random);
    Eigen::MatrixXd rotation = qr.householderQ();
    CHECK_THAT(eps_l2mu(reference * rotation.transpose(), predicted * rotation.transpose(), gram),
               Catch::Matchers::WithinRel(base, 1e-12));
}

TEST_CASE("eps_h1mu: closed forms and the 2x2 hand case") {
    Rng rng(11);
    std::vector<Eigen::MatrixXd> reference;
    for (int k = 0; k < 3; ++k) {
        Eigen::MatrixXd jac(2, 2);
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) jac(i, j) = rng.symmetric();
        reference.push_back(jac);
    }

    SECTION("exact jacobians give zero") {
        Eigen::VectorXd lambda(2);
        lambda << 1.0, 0.5;
        CHECK(eps_h1mu(reference, reference, lambda) == 0.0);
    }
    SECTION("s = 0 reduces to the unweighted relative Frobenius RMS") {
        auto predicted = reference;
        for (auto& jac : predicted) jac.array() += 0.3;
        Eigen::VectorXd unit = Eigen::VectorXd::Ones(2);
        double num = 0.0, den = 0.0;
        for (std::size_t k = 0; k < reference.size(); ++k) {
            num += (predicted[k] - reference[k]).squaredNorm();
            den += reference[k].squaredNorm();
        }
        CHECK_THAT(eps_h1mu(reference, predicted, unit),
                   Catch::Matchers::WithinRel(std::sqrt(num / den), 1e-14));
    }
    SECTION("single-sample 2x2 hand computation") {
        Eigen::MatrixXd ref(2, 2), pred(2, 2);
        ref << 1, 2, 3, 4;
        pred << 2, 4, 3, 2;  // diff = [[1,2],[0,-2]]
        Eigen::VectorXd lambda(2);
        lambda << 1.0, 0.5;  // weights^2: col0 -> 1, col1 -> 0.25
        const double num = 1.0 * (1 * 1 + 0 * 0) + 0.25 * (2 * 2 + 2 * 2);
        const double den = 1.0 * (1 * 1 + 3 * 3) + 0.25 * (2 * 2 + 4 * 4);
        CHECK_THAT(eps_h1mu({ref}, {pred}, lambda),
                   Catch::Matchers::WithinAbs(std::sqrt(num / den), 1e-14));
    }
}

TEST_CASE("measure_eval_time: constant-time stub is flat within noise") {
    BatchEval stub = [](const Eigen::MatrixXd&) {
        std::this_thread::sleep_for(std::chrono::microseconds(300));
    };
    auto timing = measure_eval_time(stub, 3, {1, 4}, 3, 17);
    // per-sample time at batch 4 should be ~4x smaller; allow generous slack
    CHECK(timing[4] < timing[1]);
    CHECK(timing[1] > 0.0);

    auto few = measure_eval_time(stub, 3, {1}, 1, 18);
    auto many = measure_eval_time(stub, 3, {1}, 5, 19);
    CHECK(few[1] < 10 * many[1]);
    CHECK(many[1] < 10 * few[1]);
}

TEST_CASE("pareto frontier: hand cases") {
    SECTION("dominating point wins") {
        std::vector<BenchRecord> records = {make_record(1, 1), make_record(2, 2)};
        auto frontier = pareto_frontier(records, CostAxis::n, ErrorAxis::l2);
        REQUIRE(frontier.size() == 1);
        CHECK(frontier[0].n == 1);
    }
    SECTION("incomparable points are both kept") {
        std::vector<BenchRecord> records = {make_record(1, 2), make_record(2, 1)};
        auto frontier = pareto_frontier(records, CostAxis::n, ErrorAxis::l2);
        CHECK(frontier.size() == 2);
    }
    SECTION("duplicates are kept together") {
        std::vector<BenchRecord> records = {make_record(1, 1), make_record(1, 1),
                                            make_record(3, 0.5)};
        auto frontier = pareto_frontier(records, CostAxis::n, ErrorAxis::l2);
        CHECK(frontier.size() == 3);
    }
}

TEST_CASE("pareto frontier matches the brute-force oracle on random records") {
    Rng rng(23);
    std::vector<BenchRecord> records;
    for (int i = 0; i < 100; ++i) {
        // small integer grid so ties actually occur
        records.push_back(make_record(1 + static_cast<double>(rng.below(12)),
                                      (1 + static_cast<double>(rng.below(12))) / 12.0));
    }
    auto frontier = pareto_frontier(records, CostAxis::n, ErrorAxis::l2);
    auto oracle = pareto_oracle(records, CostAxis::n, ErrorAxis::l2);

    // compare as multisets of (cost, error)
    std::multiset<std::pair<double, double>> got, expected;
    for (const auto& r : frontier) got.emplace(static_cast<double>(r.n), r.eps_l2);
    for (std::size_t i : oracle)
        expected.emplace(static_cast<double>(records[i].n), records[i].eps_l2);
    CHECK(got == expected);

    // frontier members must also be dominance-free among themselves
    auto inner = pareto_frontier(frontier, CostAxis::n, ErrorAxis::l2);
    CHECK(inner.size() == frontier.size());

    // stable order by cost
    for (std::size_t i = 1; i < frontier.size(); ++i)
        CHECK(cost_of(frontier[i - 1], CostAxis::n) <= cost_of(frontier[i], CostAxis::n));
}

TEST_CASE("records round-trip through json and csv report files") {
    std::vector<BenchRecord> records;
    BenchRecord a = make_record(10, 0.25);
    a.kind = "sg";
    a.hyper = {{"a", "2.0"}, {"b", "1.0"}, {"ell", "3.5"}};
    a.parameter_count = 120;
    a.t_train = 0.5;
    a.t_eval = 1e-5;
    a.t_eval_batch = 128;
    records.push_back(a);
    BenchRecord b = make_record(20, 0.1);
    b.kind = "nn_l2";
    b.eps_h1.reset();
    b.status = "ok";
    records.push_back(b);
    BenchRecord c = make_record(5, 0.5);
    c.status = "skipped:unbounded index set";
    records.push_back(c);

    auto dir = std::filesystem::temp_directory_path() / "surrbench_metrics_test";
    std::filesystem::remove_all(dir);
    write_report(records, dir);

    auto loaded = read_records_json(dir / "records.json");
    REQUIRE(loaded.size() == records.size());
    CHECK(loaded[0].kind == "sg");
    CHECK(loaded[0].hyper.at("a") == "2.0");
    CHECK(loaded[0].t_eval == a.t_eval);
    CHECK(loaded[1].eps_h1.has_value() == false);
    CHECK(loaded[2].status == "skipped:unbounded index set");

    CHECK(std::filesystem::exists(dir / "records.csv"));
    CHECK(std::filesystem::exists(dir / "pareto.csv"));
    CHECK(std::filesystem::exists(dir / "fig_eps_vs_n.csv"));
    CHECK(std::filesystem::exists(dir / "fig_eps_vs_t_eval_s.csv"));
    CHECK(std::filesystem::exists(dir / "fig_eps_vs_parameter_count.csv"));
    CHECK(std::filesystem::exists(dir / "fig_eps_vs_t_train_s.csv"));
    std::filesystem::remove_all(dir);
}
