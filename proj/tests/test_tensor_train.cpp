#include "surrbench/rng.hpp"
#include "surrbench/tensor_train.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

using namespace surrbench;

namespace {

TtCore random_core(int rl, int m, int rr, Rng& rng) {
    TtCore core;
    for (int j = 0; j < m; ++j) {
        Eigen::MatrixXd slice(rl, rr);
        for (int a = 0; a < rl; ++a)
            for (int b = 0; b < rr; ++b) slice(a, b) = rng.symmetric();
        core.slices.push_back(slice);
    }
    return core;
}

TensorTrain random_tt(const std::vector<int>& modes, const std::vector<int>& ranks, Rng& rng) {
    TensorTrain tt;
    for (std::size_t k = 0; k < modes.size(); ++k) {
        const int rl = k == 0 ? 1 : ranks[k - 1];
        const int rr = k + 1 == modes.size() ? 1 : ranks[k];
        tt.cores.push_back(random_core(rl, modes[k], rr, rng));
    }
    return tt;
}

// dense reconstruction oracle: all entries via explicit chain products
std::vector<double> dense_entries(const TensorTrain& tt) {
    const auto modes = tt.mode_sizes();
    std::vector<int> index(modes.size(), 0);
    std::vector<double> out;
    while (true) {
        out.push_back(tt_entry(tt, index));
        int k = static_cast<int>(modes.size()) - 1;
        while (k >= 0 && index[k] == modes[k] - 1) --k;
        if (k < 0) break;
        ++index[k];
        std::fill(index.begin() + k + 1, index.end(), 0);
    }
    return out;
}

std::vector<Eigen::VectorXd> barycentric_factors(const DegreeSchedule& schedule,
                                                 const NodeFamily& nodes,
                                                 const Eigen::VectorXd& c) {
    std::vector<Eigen::VectorXd> factors(schedule.dims());
    for (int k = 0; k < schedule.dims(); ++k) {
        const int level = schedule.nu[k];
        factors[k].resize(level + 1);
        basis_values_1d(
            std::span<const double>(nodes.nodes.data(), static_cast<std::size_t>(level + 1)),
            std::span<const double>(nodes.weights[level].data(),
                                    static_cast<std::size_t>(level + 1)),
            c[k], std::span<double>(factors[k].data(), static_cast<std::size_t>(level + 1)));
    }
    return factors;
}

}  // namespace

TEST_CASE("degree schedule: anisotropic rule and dimension cap") {
    auto s4 = degree_schedule(4, true, 10);
    REQUIRE(s4.dims() >= 3);
    CHECK(s4.nu[0] == 3);  // ceil(4/log2(2)) - 1
    CHECK(s4.nu[2] == 1);  // ceil(4/log2(4)) - 1

    auto iso = degree_schedule(3, false, 5);
    CHECK(iso.nu == std::vector<int>({3, 3, 3, 3, 3}));

    auto s2 = degree_schedule(2, true, 10);
    CHECK(s2.nu[0] == 1);
    CHECK(s2.dims() <= 2);  // nu_3 = ceil(2/2) - 1 = 0 caps the dimension

    CHECK_THROWS(degree_schedule(1, true, 4));
}

TEST_CASE("tt_eval: rank-1 separability") {
    // rank-1 TT with constant slices: value = product of per-dim interpolants
    Rng rng(3);
    const int d = 3;
    DegreeSchedule schedule = degree_schedule(2, false, d);
    auto nodes = leja_nodes(3);

    TensorTrain tt;
    TtCore head;
    head.slices.push_back(Eigen::MatrixXd::Constant(1, 1, 1.0));
    tt.cores.push_back(head);
    std::vector<std::vector<double>> fibers(d);
    for (int k = 0; k < d; ++k) {
        TtCore core;
        for (int j = 0; j <= 2; ++j) {
            fibers[k].push_back(rng.symmetric());
            core.slices.push_back(Eigen::MatrixXd::Constant(1, 1, fibers[k].back()));
        }
        tt.cores.push_back(core);
    }

    for (int trial = 0; trial < 20; ++trial) {
        Eigen::VectorXd c(d);
        for (int k = 0; k < d; ++k) c[k] = rng.symmetric();
        auto factors = barycentric_factors(schedule, nodes, c);
        double expected = 1.0;
        for (int k = 0; k < d; ++k) {
            double interp = 0.0;
            for (int j = 0; j <= 2; ++j) interp += factors[k][j] * fibers[k][j];
            expected *= interp;
        }
        CHECK_THAT(tt_eval(tt, factors)[0], Catch::Matchers::WithinAbs(expected, 1e-13));
    }
}

TEST_CASE("tt_eval matches the dense contraction oracle") {
    Rng rng(7);
    const int d = 3;
    const int nu = 2;
    DegreeSchedule schedule = degree_schedule(nu, false, d);
    auto nodes = leja_nodes(nu + 1);
    TensorTrain tt = random_tt({2, 3, 3, 3}, {2, 2, 2}, rng);  // d_out=2 head

    for (int trial = 0; trial < 50; ++trial) {
        Eigen::VectorXd c(d);
        for (int k = 0; k < d; ++k) c[k] = rng.symmetric();
        auto factors = barycentric_factors(schedule, nodes, c);

        // dense oracle: full tensor entries contracted against the factors
        Eigen::Vector2d expected = Eigen::Vector2d::Zero();
        std::vector<int> index(d, 0);
        while (true) {
            double weight = 1.0;
            for (int k = 0; k < d; ++k) weight *= factors[k][index[k]];
            for (int i = 0; i < 2; ++i) {
                std::vector<int> full;
                full.push_back(i);
                full.insert(full.end(), index.begin(), index.end());
                expected[i] += weight * tt_entry(tt, full);
            }
            int k = d - 1;
            while (k >= 0 && index[k] == nu) --k;
            if (k < 0) break;
            ++index[k];
            std::fill(index.begin() + k + 1, index.end(), 0);
        }
        Eigen::VectorXd got = tt_eval(tt, factors);
        CHECK((got - expected).lpNorm<Eigen::Infinity>() < 1e-12);
    }
}

TEST_CASE("tt_eval at a collocation grid point reproduces the tensor entry") {
    Rng rng(11);
    const int d = 3;
    DegreeSchedule schedule = degree_schedule(2, false, d);
    auto nodes = leja_nodes(3);
    TensorTrain tt = random_tt({2, 3, 3, 3}, {2, 2, 2}, rng);

    for (int trial = 0; trial < 10; ++trial) {
        std::vector<int> index(d);
        Eigen::VectorXd c(d);
        for (int k = 0; k < d; ++k) {
            index[k] = static_cast<int>(rng.below(3));
            c[k] = nodes.nodes[index[k]];
        }
        Eigen::VectorXd via_eval = tt_eval(tt, barycentric_factors(schedule, nodes, c));
        Eigen::VectorXd via_entry = tt_entry_vector(tt, index);
        CHECK((via_eval - via_entry).lpNorm<Eigen::Infinity>() < 1e-12);
    }
}

TEST_CASE("tt_eval is linear in any single core") {
    Rng rng(13);
    const int d = 3;
    DegreeSchedule schedule = degree_schedule(2, false, d);
    auto nodes = leja_nodes(3);
    TensorTrain tt = random_tt({2, 3, 3, 3}, {2, 3, 2}, rng);
    Eigen::VectorXd c(d);
    c << 0.3, -0.6, 0.1;
    auto factors = barycentric_factors(schedule, nodes, c);
    Eigen::VectorXd base = tt_eval(tt, factors);

    for (std::size_t k = 0; k < tt.cores.size(); ++k) {
        TensorTrain scaled = tt;
        for (auto& slice : scaled.cores[k].slices) slice *= 2.5;
        Eigen::VectorXd got = tt_eval(scaled, factors);
        CHECK((got - 2.5 * base).lpNorm<Eigen::Infinity>() < 1e-12);
    }
}

TEST_CASE("tt_round: zero-padded directions shrink to the exact ranks") {
    Rng rng(17);
    TensorTrain tt = random_tt({2, 4, 4, 4}, {2, 2, 2}, rng);
    // pad interface 1 with an extra zero rank direction
    TensorTrain padded = tt;
    for (auto& slice : padded.cores[1].slices) {
        Eigen::MatrixXd wide(slice.rows(), slice.cols() + 1);
        wide << slice, Eigen::VectorXd::Zero(slice.rows());
        slice = wide;
    }
    for (auto& slice : padded.cores[2].slices) {
        Eigen::MatrixXd tall(slice.rows() + 1, slice.cols());
        tall << slice, Eigen::RowVectorXd::Zero(slice.cols());
        slice = tall;
    }
    CHECK(padded.ranks()[1] == 3);
    TensorTrain rounded = tt_round(padded, 1e-12);
    CHECK(rounded.ranks() == tt.ranks());

    auto before = dense_entries(tt);
    auto after = dense_entries(rounded);
    for (std::size_t i = 0; i < before.size(); ++i)
        CHECK_THAT(after[i], Catch::Matchers::WithinAbs(before[i], 1e-12));
}

TEST_CASE("tt_round round-trips a random train at tight tolerance") {
    Rng rng(19);
    TensorTrain tt = random_tt({3, 4, 4, 4, 4}, {3, 3, 3, 3}, rng);  // d=4, nu=3
    TensorTrain rounded = tt_round(tt, 1e-12);

    auto before = dense_entries(tt);
    auto after = dense_entries(rounded);
    double norm2 = 0.0, err2 = 0.0;
    for (std::size_t i = 0; i < before.size(); ++i) {
        norm2 += before[i] * before[i];
        err2 += (after[i] - before[i]) * (after[i] - before[i]);
    }
    CHECK(std::sqrt(err2) < 1e-11 * std::sqrt(norm2));
}

TEST_CASE("tt_round is idempotent at fixed tolerance") {
    Rng rng(23);
    TensorTrain tt = random_tt({2, 4, 4, 4}, {3, 3, 2}, rng);
    TensorTrain once = tt_round(tt, 1e-6);
    TensorTrain twice = tt_round(once, 1e-6);
    CHECK(once.ranks() == twice.ranks());
    auto a = dense_entries(once);
    auto b = dense_entries(twice);
    double scale = tt_norm(tt);
    for (std::size_t i = 0; i < a.size(); ++i)
        CHECK_THAT(b[i], Catch::Matchers::WithinAbs(a[i], 1e-13 * scale));
}

TEST_CASE("rounding error stays within the tolerance bound at random points") {
    Rng rng(29);
    const int d = 3;
    DegreeSchedule schedule = degree_schedule(3, false, d);
    auto nodes = leja_nodes(4);
    TensorTrain tt = random_tt({2, 4, 4, 4}, {3, 4, 3}, rng);
    const double tol = 1e-6;
    TensorTrain rounded = tt_round(tt, tol);
    const double norm = tt_norm(tt);
    for (int trial = 0; trial < 30; ++trial) {
        Eigen::VectorXd c(d);
        for (int k = 0; k < d; ++k) c[k] = rng.symmetric();
        auto factors = barycentric_factors(schedule, nodes, c);
        Eigen::VectorXd a = tt_eval(tt, factors);
        Eigen::VectorXd b = tt_eval(rounded, factors);
        CHECK((a - b).lpNorm<Eigen::Infinity>() <= 10.0 * tol * norm);
    }
}

TEST_CASE("maxvol selects well-conditioned rows") {
    Rng rng(31);
    Eigen::MatrixXd a(40, 4);
    for (int i = 0; i < 40; ++i)
        for (int j = 0; j < 4; ++j) a(i, j) = rng.symmetric();
    auto rows = maxvol(a, 1e-2);
    REQUIRE(rows.size() == 4);
    Eigen::MatrixXd sel(4, 4);
    for (int i = 0; i < 4; ++i) sel.row(i) = a.row(rows[i]);
    Eigen::MatrixXd b = sel.transpose().partialPivLu().solve(a.transpose()).transpose();
    CHECK(b.cwiseAbs().maxCoeff() <= 1.0 + 1e-2 + 1e-9);
}

TEST_CASE("tt_cross: constant probe yields a rank-1 train within the probe budget") {
    const int d = 3, nu = 3, cap = 1;
    DegreeSchedule schedule = degree_schedule(nu, false, d);
    auto nodes = leja_nodes(nu + 1);
    int probes = 0;
    VectorProbe probe = [&](const Eigen::VectorXd&) {
        ++probes;
        return Eigen::Vector2d(2.0, -0.5);
    };
    TtCrossOptions options;
    options.rank_cap = cap;
    auto s = build_tt_surrogate(probe, 2, schedule, nodes, options);
    CHECK(probes <= d * (nu + 1) * cap);
    CHECK(s.probe_count() == probes);
    for (int r : s.tt().ranks()) CHECK(r == 1);
    CHECK(s.converged());

    Rng rng(37);
    for (int trial = 0; trial < 20; ++trial) {
        Eigen::VectorXd c(d);
        for (int k = 0; k < d; ++k) c[k] = rng.symmetric();
        CHECK((s.eval(c) - Eigen::Vector2d(2.0, -0.5)).lpNorm<Eigen::Infinity>() < 1e-13);
    }
}

TEST_CASE("tt_cross recovers a separable product function at rank cap 2") {
    const int d = 3, nu = 5;
    DegreeSchedule schedule = degree_schedule(nu, false, d);
    auto nodes = leja_nodes(nu + 1);
    auto f = [](const Eigen::VectorXd& c) {
        double v = 1.0;
        for (int k = 0; k < c.size(); ++k) v *= std::cos(c[k]);
        return v;
    };
    VectorProbe probe = [&](const Eigen::VectorXd& c) {
        return Eigen::VectorXd::Constant(1, f(c));
    };
    TtCrossOptions options;
    options.rank_cap = 2;
    auto s = build_tt_surrogate(probe, 1, schedule, nodes, options);

    Rng rng(41);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<int> index(d);
        Eigen::VectorXd c(d);
        for (int k = 0; k < d; ++k) {
            index[k] = static_cast<int>(rng.below(nu + 1));
            c[k] = nodes.nodes[index[k]];
        }
        worst = std::max(worst, std::abs(s.eval(c)[0] - f(c)));
    }
    CHECK(worst < 1e-10);
}

TEST_CASE("tt_cross recovers the rank-2 sum function exactly") {
    const int d = 3, nu = 3, cap = 2;
    DegreeSchedule schedule = degree_schedule(nu, false, d);
    auto nodes = leja_nodes(nu + 1);
    int probes = 0;
    VectorProbe probe = [&](const Eigen::VectorXd& c) {
        ++probes;
        return Eigen::VectorXd::Constant(1, c.sum());
    };
    TtCrossOptions options;
    options.rank_cap = cap;
    auto s = build_tt_surrogate(probe, 1, schedule, nodes, options);

    CHECK(probes <= 2 * d * (nu + 1) * cap * cap * options.sweeps);

    Rng rng(43);
    for (int trial = 0; trial < 50; ++trial) {
        Eigen::VectorXd c(d);
        for (int k = 0; k < d; ++k) c[k] = rng.symmetric();
        CHECK_THAT(s.eval(c)[0], Catch::Matchers::WithinAbs(c.sum(), 1e-11));
    }
}

TEST_CASE("tt_cross interpolates the probe on its final cross fibers") {
    const int d = 3, nu = 4;
    auto f = [](const std::vector<int>& j) {
        return std::sin(1.0 * j[0]) + std::cos(0.5 * j[1]) * j[2];
    };
    IndexProbe probe = [&](const std::vector<int>& j) {
        return Eigen::VectorXd::Constant(1, f(j));
    };
    TtCrossOptions options;
    options.rank_cap = 3;
    options.sweeps = 3;
    auto result = tt_cross(probe, 1, {nu + 1, nu + 1, nu + 1}, options);

    for (const auto& prefix : result.final_left_set) {
        REQUIRE(prefix.size() == static_cast<std::size_t>(d - 1));
        for (int j = 0; j <= nu; ++j) {
            std::vector<int> index = prefix;
            index.push_back(j);
            const double approx = tt_entry_vector(result.tt, index)[0];
            CHECK_THAT(approx, Catch::Matchers::WithinAbs(f(index), 1e-10));
        }
    }
}

TEST_CASE("tt surrogate jacobian") {
    const int d = 3, nu = 5;
    DegreeSchedule schedule = degree_schedule(nu, false, d);
    auto nodes = leja_nodes(nu + 1);

    SECTION("constant surrogate has zero jacobian") {
        VectorProbe probe = [](const Eigen::VectorXd&) {
            return Eigen::VectorXd::Constant(2, 3.0);
        };
        TtCrossOptions options;
        options.rank_cap = 1;
        auto s = build_tt_surrogate(probe, 2, schedule, nodes, options);
        Eigen::VectorXd c = Eigen::VectorXd::Constant(d, 0.4);
        CHECK(s.jacobian(c).cwiseAbs().maxCoeff() < 1e-13);
    }

    SECTION("separable product: analytic derivative") {
        VectorProbe probe = [](const Eigen::VectorXd& c) {
            double v = 1.0;
            for (int k = 0; k < c.size(); ++k) v *= std::cos(c[k]);
            return Eigen::VectorXd::Constant(1, v);
        };
        // degree high enough that the interpolation error of cos is ~1e-12
        DegreeSchedule fine = degree_schedule(14, false, d);
        auto fine_nodes = leja_nodes(15);
        TtCrossOptions options;
        options.rank_cap = 2;
        auto s = build_tt_surrogate(probe, 1, fine, fine_nodes, options);
        Rng rng(47);
        for (int trial = 0; trial < 10; ++trial) {
            Eigen::VectorXd c(d);
            for (int k = 0; k < d; ++k) c[k] = 0.9 * rng.symmetric();
            Eigen::MatrixXd jac = s.jacobian(c);
            for (int m = 0; m < d; ++m) {
                double expected = -std::sin(c[m]);
                for (int k = 0; k < d; ++k)
                    if (k != m) expected *= std::cos(c[k]);
                CHECK_THAT(jac(0, m), Catch::Matchers::WithinAbs(expected, 1e-9));
            }
        }
    }

    SECTION("finite-difference agreement on a generic cross surrogate") {
        VectorProbe probe = [](const Eigen::VectorXd& c) {
            return Eigen::Vector2d(std::sin(c[0] + 0.3 * c[1] * c[2]), std::exp(0.2 * c.sum()));
        };
        TtCrossOptions options;
        options.rank_cap = 4;
        options.sweeps = 3;
        auto s = build_tt_surrogate(probe, 2, schedule, nodes, options);
        Rng rng(53);
        const double eps = 1e-6;
        for (int trial = 0; trial < 20; ++trial) {
            Eigen::VectorXd c(d);
            for (int k = 0; k < d; ++k) c[k] = 0.9 * rng.symmetric();
            Eigen::MatrixXd jac = s.jacobian(c);
            for (int m = 0; m < d; ++m) {
                Eigen::VectorXd hi = c, lo = c;
                hi[m] += eps;
                lo[m] -= eps;
                Eigen::VectorXd fd = (s.eval(hi) - s.eval(lo)) / (2 * eps);
                const double scale = std::max(1.0, fd.lpNorm<Eigen::Infinity>());
                CHECK((jac.col(m) - fd).lpNorm<Eigen::Infinity>() / scale < 1e-5);
            }
        }
    }
}

TEST_CASE("storage count matches the core shapes") {
    Rng rng(59);
    TensorTrain tt = random_tt({3, 4, 5, 2}, {2, 3, 2}, rng);
    std::int64_t expected = 1 * 3 * 2 + 2 * 4 * 3 + 3 * 5 * 2 + 2 * 2 * 1;
    CHECK(tt.entry_count() == expected);
}

TEST_CASE("tt surrogate serialization round trip") {
    const int d = 3, nu = 3;
    DegreeSchedule schedule = degree_schedule(nu, false, d);
    auto nodes = leja_nodes(nu + 1);
    VectorProbe probe = [](const Eigen::VectorXd& c) {
        return Eigen::Vector2d(c.sum(), c.prod());
    };
    TtCrossOptions options;
    options.rank_cap = 3;
    auto s = build_tt_surrogate(probe, 2, schedule, nodes, options);

    auto dir = std::filesystem::temp_directory_path() / "surrbench_tt_test";
    s.save(dir);
    auto loaded = TensorTrainSurrogate::load(dir);
    CHECK(loaded.probe_count() == s.probe_count());
    Rng rng(61);
    for (int trial = 0; trial < 10; ++trial) {
        Eigen::VectorXd c(d);
        for (int k = 0; k < d; ++k) c[k] = rng.symmetric();
        CHECK((loaded.eval(c) - s.eval(c)).lpNorm<Eigen::Infinity>() == 0.0);
    }
    std::filesystem::remove_all(dir);
}
